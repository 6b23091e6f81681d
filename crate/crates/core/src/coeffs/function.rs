use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{parse_expression, Expr};
use crate::error::{Error, EvalError, Result};
use crate::numerics::quad::gauss_legendre;

/// Anything the solvers can sample on `[0, 1]`. Singular points evaluate
/// to NaN; callers that need the reason use [`Formula::try_eval`].
pub trait Function: Send + Sync {
    fn eval(&self, x: f64) -> f64;
}

pub type Func = Arc<dyn Function>;

impl<F> Function for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

impl Function for Expr<f64> {
    fn eval(&self, x: f64) -> f64 {
        Expr::eval(self, x).unwrap_or(f64::NAN)
    }
}

pub fn func<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Func {
    Arc::new(f)
}

/// A coefficient given either as one expression or as expressions on
/// consecutive subintervals of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Single(Expr<f64>),
    /// `pieces[i]` applies for `x <= breaks[i]`, the last piece beyond.
    Piecewise { breaks: Vec<f64>, pieces: Vec<Expr<f64>> },
}

impl Formula {
    pub fn parse(src: &str) -> Result<Formula> {
        Ok(Formula::Single(parse_expression(src)?))
    }

    pub fn piecewise(parts: &[(Option<f64>, &str)]) -> Result<Formula> {
        let mut breaks = Vec::new();
        let mut pieces = Vec::new();
        for (i, (upto, src)) in parts.iter().enumerate() {
            pieces.push(parse_expression(src)?);
            match upto {
                Some(b) if i + 1 < parts.len() => breaks.push(*b),
                None if i + 1 == parts.len() => {}
                _ => {
                    return Err(Error::InvalidProblem(
                        "every piece but the last needs an upper breakpoint".into(),
                    ))
                }
            }
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProblem("breakpoints must increase".into()));
        }
        Ok(Formula::Piecewise { breaks, pieces })
    }

    fn piece(&self, x: f64) -> &Expr<f64> {
        match self {
            Formula::Single(e) => e,
            Formula::Piecewise { breaks, pieces } => {
                let i = breaks.iter().position(|&b| x <= b).unwrap_or(breaks.len());
                &pieces[i]
            }
        }
    }

    pub fn try_eval(&self, x: f64) -> std::result::Result<f64, EvalError> {
        self.piece(x).eval(x)
    }

    pub fn differentiate(&self) -> Formula {
        match self {
            Formula::Single(e) => Formula::Single(e.differentiate()),
            Formula::Piecewise { breaks, pieces } => Formula::Piecewise {
                breaks: breaks.clone(),
                pieces: pieces.iter().map(|p| p.differentiate()).collect(),
            },
        }
    }

    pub fn to_func(&self) -> Func {
        Arc::new(self.clone())
    }
}

impl Function for Formula {
    fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Single(e) => write!(f, "{}", e),
            Formula::Piecewise { breaks, pieces } => {
                for (i, p) in pieces.iter().enumerate() {
                    match breaks.get(i) {
                        Some(b) => write!(f, "{} for phi <= {}; ", p, b)?,
                        None => write!(f, "{} otherwise", p)?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// On-disk form of a [`Formula`]: a string, or a list of pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FormulaSource {
    Single(String),
    Pieces(Vec<PieceSource>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upto: Option<f64>,
    pub expr: String,
}

impl FormulaSource {
    pub fn to_formula(&self) -> Result<Formula> {
        match self {
            FormulaSource::Single(s) => Formula::parse(s),
            FormulaSource::Pieces(ps) => {
                let parts: Vec<(Option<f64>, &str)> =
                    ps.iter().map(|p| (p.upto, p.expr.as_str())).collect();
                Formula::piecewise(&parts)
            }
        }
    }

    pub fn from_formula(f: &Formula) -> FormulaSource {
        match f {
            Formula::Single(e) => FormulaSource::Single(e.to_string()),
            Formula::Piecewise { breaks, pieces } => FormulaSource::Pieces(
                pieces
                    .iter()
                    .enumerate()
                    .map(|(i, p)| PieceSource { upto: breaks.get(i).copied(), expr: p.to_string() })
                    .collect(),
            ),
        }
    }
}

/// `F(x) = int_0^x h`, tabulated on a uniform grid and completed by
/// Gauss-Legendre on the last cell.
pub struct Antiderivative {
    h: Func,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Antiderivative {
    pub fn new(h: Func, cells: usize) -> Antiderivative {
        let mut nodes = Vec::with_capacity(cells + 1);
        let mut values = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        nodes.push(0.0);
        values.push(0.0);
        for i in 0..cells {
            let a = i as f64 / cells as f64;
            let b = (i + 1) as f64 / cells as f64;
            acc += gauss_legendre(&|x| h.eval(x), a, b, 4);
            nodes.push(b);
            values.push(acc);
        }
        Antiderivative { h, nodes, values }
    }
}

impl Function for Antiderivative {
    fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len() - 1;
        let i = ((x * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize;
        let a = self.nodes[i];
        self.values[i] + gauss_legendre(&|t| self.h.eval(t), a, x, 1)
    }
}
