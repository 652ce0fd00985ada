//! Rate expressions specialised to one integration interval, where every
//! clock they read moves at a constant rate.

use crate::expr::BinOp;
use crate::network::{CExpr, Env};

pub(super) enum Num {
    Const(f64),
    /// `x0 + r * t`
    Linear(f64, f64),
    Neg(Box<Num>),
    Bin(BinOp, Box<Num>, Box<Num>),
    /// Needs the generic evaluator.
    Opaque,
}

impl Num {
    pub(super) fn new(e: &CExpr, env: &Env, x0: &[f64], fixed: &[f64]) -> Self {
        if !e.depends_on_clocks() {
            return match e.eval(env).ok().and_then(|v| v.as_f64()) {
                Some(x) => Num::Const(x),
                None => Num::Opaque,
            };
        }
        let rec = |x: &CExpr| Box::new(Num::new(x, env, x0, fixed));
        match e {
            CExpr::Clock(c) => Num::Linear(x0[*c], fixed[*c]),
            CExpr::Unary(crate::expr::UnOp::Neg, a) => Num::Neg(rec(a)),
            CExpr::Binary(op @ (BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div), a, b) => Num::Bin(*op, rec(a), rec(b)),
            _ => Num::Opaque,
        }
    }

    /// `None` defers to the generic evaluator (opaque parts, division by zero).
    pub(super) fn at(&self, t: f64) -> Option<f64> {
        Some(match self {
            Num::Const(x) => *x,
            Num::Linear(x0, r) => x0 + r * t,
            Num::Neg(a) => -a.at(t)?,
            Num::Bin(op, a, b) => {
                let (x, y) = (a.at(t)?, b.at(t)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    _ if y == 0.0 => return None,
                    _ => x / y,
                }
            }
            Num::Opaque => return None,
        })
    }
}
