//! Evaluatable scalar functions on R^n.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsl::{self, EvalError, Expr};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Smooth,
    LocallyLipschitz,
}

/// A gradient returned by an exact or automatic derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub grad: Vec<f64>,
    /// The derivative is a one-sided choice at a kink.
    pub at_kink: bool,
    /// Branch signature when known (expression-backed handles).
    pub branches: Option<Vec<i8>>,
}

type EvalFn = dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Result<GradientSample, EvalError> + Send + Sync;

#[derive(Clone)]
enum Source {
    Expr(Arc<Expr>),
    Closure { eval: Arc<EvalFn>, grad: Option<Arc<GradFn>> },
}

/// A pure scalar function with an optional exact gradient. Cheap to clone and
/// safe to share across threads.
#[derive(Clone)]
pub struct FunctionHandle {
    name: String,
    dim: usize,
    smoothness: Smoothness,
    source: Source,
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

fn has_kink_ops(e: &Expr) -> bool {
    use dsl::Func1;
    match e {
        Expr::Num(_) | Expr::Var(_) => false,
        Expr::Call1(Func1::Abs, _) | Expr::Call2(..) => true,
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call1(_, a) => has_kink_ops(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            has_kink_ops(a) || has_kink_ops(b)
        }
    }
}

impl FunctionHandle {
    /// Wraps an expression; gradients come from forward-mode differentiation.
    pub fn from_expr(name: impl Into<String>, dim: usize, expr: Expr) -> Self {
        let smoothness =
            if has_kink_ops(&expr) { Smoothness::LocallyLipschitz } else { Smoothness::Smooth };
        FunctionHandle { name: name.into(), dim, smoothness, source: Source::Expr(Arc::new(expr)) }
    }

    /// Parses `source` and wraps the result.
    pub fn parse(name: impl Into<String>, source: &str, dim: usize) -> Result<Self, dsl::ParseError> {
        Ok(Self::from_expr(name, dim, dsl::parse(source, dim)?))
    }

    /// Wraps a closure without a gradient; derivatives fall back to finite differences.
    pub fn from_fn<F>(name: impl Into<String>, dim: usize, smoothness: Smoothness, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        FunctionHandle {
            name: name.into(),
            dim,
            smoothness,
            source: Source::Closure { eval: Arc::new(move |x| Ok(f(x))), grad: None },
        }
    }

    /// Wraps a smooth closure together with its exact gradient.
    pub fn with_gradient<F, G>(name: impl Into<String>, dim: usize, f: F, grad: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        FunctionHandle {
            name: name.into(),
            dim,
            smoothness: Smoothness::Smooth,
            source: Source::Closure {
                eval: Arc::new(move |x| Ok(f(x))),
                grad: Some(Arc::new(move |x| {
                    Ok(GradientSample { grad: grad(x), at_kink: false, branches: None })
                })),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.source {
            Source::Expr(e) => Some(e),
            Source::Closure { .. } => None,
        }
    }

    pub fn has_gradient(&self) -> bool {
        match &self.source {
            Source::Expr(_) => true,
            Source::Closure { grad, .. } => grad.is_some(),
        }
    }

    pub fn eval_slice(&self, x: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::Dimension { need: self.dim, got: x.len() });
        }
        let v = match &self.source {
            Source::Expr(e) => dsl::eval(e, x)?,
            Source::Closure { eval, .. } => eval(x)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { term: self.name.clone() })
        }
    }

    pub fn eval(&self, x: &Point) -> Result<f64, EvalError> {
        self.eval_slice(x.coords())
    }

    /// Exact or automatic gradient, `None` when the handle has neither.
    pub fn gradient_slice(&self, x: &[f64]) -> Option<Result<GradientSample, EvalError>> {
        if x.len() != self.dim {
            return Some(Err(EvalError::Dimension { need: self.dim, got: x.len() }));
        }
        match &self.source {
            Source::Expr(e) => Some(dsl::eval_dual(e, x).map(|d| GradientSample {
                grad: d.derivative,
                at_kink: d.at_kink,
                branches: Some(d.branches),
            })),
            Source::Closure { grad, .. } => grad.as_ref().map(|g| g(x)),
        }
    }

    pub fn gradient(&self, x: &Point) -> Option<Result<GradientSample, EvalError>> {
        self.gradient_slice(x.coords())
    }

    /// The handle for `-f`. Values and gradients are negated exactly.
    pub fn negated(&self) -> FunctionHandle {
        let name = match self.name.strip_prefix('-') {
            Some(inner) => inner.to_string(),
            None => format!("-{}", self.name),
        };
        let source = match &self.source {
            Source::Expr(e) => match e.as_ref() {
                Expr::Neg(inner) => Source::Expr(Arc::new((**inner).clone())),
                other => Source::Expr(Arc::new(Expr::neg(other.clone()))),
            },
            Source::Closure { eval, grad } => {
                let eval = eval.clone();
                let grad = grad.clone();
                Source::Closure {
                    eval: Arc::new(move |x| eval(x).map(|v| -v)),
                    grad: grad.map(|g| -> Arc<GradFn> {
                        Arc::new(move |x| {
                            g(x).map(|mut s| {
                                s.grad.iter_mut().for_each(|v| *v = -*v);
                                s
                            })
                        })
                    }),
                }
            }
        };
        FunctionHandle { name, dim: self.dim, smoothness: self.smoothness, source }
    }
}
