//! A small arithmetic expression language with forward-mode differentiation.

mod ast;
mod dual;
mod parse;

pub use ast::{Expr, Func1, Func2};
pub use dual::{eval, eval_dual, DualValue, EvalError};
pub use parse::{parse, ParseError};
