//! Query language AST: the five statistical query forms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::model::Span;
use crate::monitors::WhConstraint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PathFormula {
    Eventually(Expr),
    Globally(Expr),
}

impl PathFormula {
    pub fn state_expr(&self) -> &Expr {
        match self {
            PathFormula::Eventually(e) | PathFormula::Globally(e) => e,
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Eventually(e) => write!(f, "<> {e}"),
            PathFormula::Globally(e) => write!(f, "[] {e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `Pr[..](f) >= p0`
    Ge,
    /// `Pr[..](f) <= p0`
    Le,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Query {
    Estimate {
        formula: PathFormula,
        bound: f64,
    },
    Hypothesis {
        formula: PathFormula,
        bound: f64,
        p0: f64,
        relation: Relation,
    },
    Simulate {
        runs: u64,
        bound: f64,
        exprs: Vec<Expr>,
        sample_step: Option<f64>,
    },
    Compare {
        formula1: PathFormula,
        bound1: f64,
        formula2: PathFormula,
        bound2: f64,
    },
    Expected {
        bound: f64,
        runs: u64,
        mode: Extremum,
        expr: Expr,
    },
}

impl Query {
    pub fn bounds(&self) -> Vec<f64> {
        match self {
            Query::Estimate { bound, .. }
            | Query::Hypothesis { bound, .. }
            | Query::Simulate { bound, .. }
            | Query::Expected { bound, .. } => vec![*bound],
            Query::Compare { bound1, bound2, .. } => vec![*bound1, *bound2],
        }
    }

    /// Replaces every time bound.
    pub fn with_bound(mut self, b: f64) -> Query {
        match &mut self {
            Query::Estimate { bound, .. }
            | Query::Hypothesis { bound, .. }
            | Query::Simulate { bound, .. }
            | Query::Expected { bound, .. } => *bound = b,
            Query::Compare { bound1, bound2, .. } => {
                *bound1 = b;
                *bound2 = b;
            }
        }
        self
    }

    pub fn form(&self) -> &'static str {
        match self {
            Query::Estimate { .. } => "estimate",
            Query::Hypothesis { .. } => "hypothesis",
            Query::Simulate { .. } => "simulate",
            Query::Compare { .. } => "compare",
            Query::Expected { .. } => "expected",
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Estimate { formula, bound } => write!(f, "Pr[<={bound}]({formula})"),
            Query::Hypothesis {
                formula,
                bound,
                p0,
                relation,
            } => {
                let op = match relation {
                    Relation::Ge => ">=",
                    Relation::Le => "<=",
                };
                write!(f, "Pr[<={bound}]({formula}) {op} {p0}")
            }
            Query::Simulate {
                runs, bound, exprs, ..
            } => {
                write!(f, "simulate {runs} [<={bound}] {{")?;
                for (i, e) in exprs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "}}")
            }
            Query::Compare {
                formula1,
                bound1,
                formula2,
                bound2,
            } => write!(f, "Pr[<={bound1}]({formula1}) >= Pr[<={bound2}]({formula2})"),
            Query::Expected {
                bound,
                runs,
                mode,
                expr,
            } => {
                let m = match mode {
                    Extremum::Max => "max",
                    Extremum::Min => "min",
                };
                write!(f, "E[<={bound}; {runs}]({m}: {expr})")
            }
        }
    }
}

/// What a query result is expected to be.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Valid,
    Invalid,
    /// Estimate interval (or expected-value mean) must lie inside [lo, hi].
    Within(f64, f64),
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Valid => write!(f, "valid"),
            Expectation::Invalid => write!(f, "invalid"),
            Expectation::Within(lo, hi) => write!(f, "[{lo}, {hi}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedQuery {
    pub name: String,
    pub query: Query,
    pub expected: Option<Expectation>,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFile {
    pub constraints: Vec<WhConstraint>,
    pub queries: Vec<NamedQuery>,
}
