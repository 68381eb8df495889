//! Plain and forward-mode evaluation of [`Expr`] trees.
//!
//! Kink convention: `abs` at 0 takes subderivative 0, `min`/`max` ties take the
//! first argument. Either event sets [`DualValue::at_kink`].

use thiserror::Error;

use super::ast::{Expr, Func1, Func2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{term}`")]
    DivisionByZero { term: String },
    #[error("`{func}` outside its domain in `{term}`")]
    Domain { func: &'static str, term: String },
    #[error("non-finite result in `{term}`")]
    NonFinite { term: String },
    #[error("point has dimension {got}, expression needs {need}")]
    Dimension { need: usize, got: usize },
}

/// Value and forward-mode gradient of an expression at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub derivative: Vec<f64>,
    /// Some abs/min/max argument sat exactly on its kink.
    pub at_kink: bool,
    /// Branch taken by every abs/min/max in evaluation order; equal signatures
    /// at two points mean the same smooth piece was used.
    pub branches: Vec<i8>,
}

fn finite(v: f64, e: &Expr) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { term: e.to_string() })
    }
}

fn check_dim(e: &Expr, x: &[f64]) -> Result<(), EvalError> {
    let need = e.max_var();
    if need > x.len() {
        return Err(EvalError::Dimension { need, got: x.len() });
    }
    Ok(())
}

/// Derivative-free evaluation.
pub fn eval(e: &Expr, x: &[f64]) -> Result<f64, EvalError> {
    check_dim(e, x)?;
    eval_plain(e, x)
}

fn eval_plain(e: &Expr, x: &[f64]) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Num(v) => *v,
        Expr::Var(i) => x[i - 1],
        Expr::Neg(a) => -eval_plain(a, x)?,
        Expr::Add(a, b) => eval_plain(a, x)? + eval_plain(b, x)?,
        Expr::Sub(a, b) => eval_plain(a, x)? - eval_plain(b, x)?,
        Expr::Mul(a, b) => eval_plain(a, x)? * eval_plain(b, x)?,
        Expr::Div(a, b) => {
            let num = eval_plain(a, x)?;
            let den = eval_plain(b, x)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero { term: e.to_string() });
            }
            num / den
        }
        Expr::Pow(a, n) => {
            let base = eval_plain(a, x)?;
            if base == 0.0 && *n < 0 {
                return Err(EvalError::DivisionByZero { term: e.to_string() });
            }
            base.powi(*n)
        }
        Expr::Call1(g, a) => {
            let u = eval_plain(a, x)?;
            match g {
                Func1::Exp => u.exp(),
                Func1::Log => {
                    if u <= 0.0 {
                        return Err(EvalError::Domain { func: "log", term: e.to_string() });
                    }
                    u.ln()
                }
                Func1::Sqrt => {
                    if u < 0.0 {
                        return Err(EvalError::Domain { func: "sqrt", term: e.to_string() });
                    }
                    u.sqrt()
                }
                Func1::Abs => u.abs(),
                Func1::Atan => u.atan(),
            }
        }
        Expr::Call2(g, a, b) => {
            let u = eval_plain(a, x)?;
            let w = eval_plain(b, x)?;
            match g {
                Func2::Min => {
                    if u <= w {
                        u
                    } else {
                        w
                    }
                }
                Func2::Max => {
                    if u >= w {
                        u
                    } else {
                        w
                    }
                }
            }
        }
    };
    finite(v, e)
}

/// Forward-mode evaluation returning value, gradient and kink information.
pub fn eval_dual(e: &Expr, x: &[f64]) -> Result<DualValue, EvalError> {
    check_dim(e, x)?;
    let mut trace = Trace { at_kink: false, branches: Vec::new(), n: x.len() };
    let (value, derivative) = trace.eval(e, x)?;
    Ok(DualValue { value, derivative, at_kink: trace.at_kink, branches: trace.branches })
}

struct Trace {
    at_kink: bool,
    branches: Vec<i8>,
    n: usize,
}

type D = (f64, Vec<f64>);

fn scale(s: f64, d: &[f64]) -> Vec<f64> {
    d.iter().map(|v| s * v).collect()
}

impl Trace {
    fn eval(&mut self, e: &Expr, x: &[f64]) -> Result<D, EvalError> {
        let (v, d) = match e {
            Expr::Num(v) => (*v, vec![0.0; self.n]),
            Expr::Var(i) => {
                let mut d = vec![0.0; self.n];
                d[i - 1] = 1.0;
                (x[i - 1], d)
            }
            Expr::Neg(a) => {
                let (v, d) = self.eval(a, x)?;
                (-v, d.into_iter().map(|g| -g).collect())
            }
            Expr::Add(a, b) => {
                let (u, du) = self.eval(a, x)?;
                let (w, dw) = self.eval(b, x)?;
                (u + w, du.iter().zip(&dw).map(|(p, q)| p + q).collect())
            }
            Expr::Sub(a, b) => {
                let (u, du) = self.eval(a, x)?;
                let (w, dw) = self.eval(b, x)?;
                (u - w, du.iter().zip(&dw).map(|(p, q)| p - q).collect())
            }
            Expr::Mul(a, b) => {
                let (u, du) = self.eval(a, x)?;
                let (w, dw) = self.eval(b, x)?;
                (u * w, du.iter().zip(&dw).map(|(p, q)| p * w + u * q).collect())
            }
            Expr::Div(a, b) => {
                let (u, du) = self.eval(a, x)?;
                let (w, dw) = self.eval(b, x)?;
                if w == 0.0 {
                    return Err(EvalError::DivisionByZero { term: e.to_string() });
                }
                let v = u / w;
                (v, du.iter().zip(&dw).map(|(p, q)| (p - v * q) / w).collect())
            }
            Expr::Pow(a, n) => {
                let (u, du) = self.eval(a, x)?;
                if u == 0.0 && *n < 0 {
                    return Err(EvalError::DivisionByZero { term: e.to_string() });
                }
                let slope = if *n == 0 { 0.0 } else { *n as f64 * u.powi(n - 1) };
                (u.powi(*n), scale(slope, &du))
            }
            Expr::Call1(g, a) => {
                let (u, du) = self.eval(a, x)?;
                let (v, slope) = match g {
                    Func1::Exp => {
                        let v = u.exp();
                        (v, v)
                    }
                    Func1::Log => {
                        if u <= 0.0 {
                            return Err(EvalError::Domain { func: "log", term: e.to_string() });
                        }
                        (u.ln(), 1.0 / u)
                    }
                    Func1::Sqrt => {
                        if u <= 0.0 {
                            return Err(EvalError::Domain { func: "sqrt", term: e.to_string() });
                        }
                        let v = u.sqrt();
                        (v, 0.5 / v)
                    }
                    Func1::Abs => {
                        let branch = if u > 0.0 {
                            1
                        } else if u < 0.0 {
                            -1
                        } else {
                            self.at_kink = true;
                            0
                        };
                        self.branches.push(branch);
                        (u.abs(), branch as f64)
                    }
                    Func1::Atan => (u.atan(), 1.0 / (1.0 + u * u)),
                };
                (v, scale(slope, &du))
            }
            Expr::Call2(g, a, b) => {
                let (u, du) = self.eval(a, x)?;
                let (w, dw) = self.eval(b, x)?;
                if u == w {
                    self.at_kink = true;
                }
                let first = match g {
                    Func2::Min => u <= w,
                    Func2::Max => u >= w,
                };
                self.branches.push(if first { 1 } else { -1 });
                if first {
                    (u, du)
                } else {
                    (w, dw)
                }
            }
        };
        let v = finite(v, e)?;
        if d.iter().any(|g| !g.is_finite()) {
            return Err(EvalError::NonFinite { term: e.to_string() });
        }
        Ok((v, d))
    }
}
