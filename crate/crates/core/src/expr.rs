//! Expression AST shared by models and queries.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Tolerance used for comparisons that involve real values.
pub const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Mul,
    Div,
    Mod,
    Add,
    Sub,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Imply,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Imply => "imply",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Imply => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne => 5,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 6,
            BinOp::Add | BinOp::Sub => 7,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 8,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Imply)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Mul | BinOp::Div | BinOp::Mod | BinOp::Add | BinOp::Sub
        )
    }

    /// The comparison with operands swapped (`a < b` iff `b > a`).
    pub fn flipped(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Abs,
    Fabs,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Fabs => "fabs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "abs" => Some(Func::Abs),
            "fabs" => Some(Func::Fabs),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Abs | Func::Fabs => 1,
            Func::Min | Func::Max => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Bool(bool),
    /// `x` or `Comp.x`
    Name(Vec<String>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn name(n: &str) -> Expr {
        Expr::Name(n.split('.').map(str::to_string).collect())
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    /// Splits a chain of `&&` into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::Binary(BinOp::And, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Calls `f` on every name in the expression.
    pub fn visit_names<'a>(&'a self, f: &mut dyn FnMut(&'a [String])) {
        match self {
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) => {}
            Expr::Name(path) => f(path),
            Expr::Unary(_, e) => e.visit_names(f),
            Expr::Binary(_, l, r) => {
                l.visit_names(f);
                r.visit_names(f);
            }
            Expr::Cond(c, a, b) => {
                c.visit_names(f);
                a.visit_names(f);
                b.visit_names(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_names(f)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Cond(..) => 1,
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 9,
            Expr::Int(v) if *v < 0 => 9,
            Expr::Real(v) if v.is_sign_negative() => 9,
            _ => 10,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

pub(crate) fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        let s = format!("{v:?}");
        if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Real(v) => write!(f, "{}", fmt_real(*v)),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Name(path) => write!(f, "{}", path.join(".")),
            Expr::Unary(op, e) => {
                match op {
                    UnOp::Not => write!(f, "!")?,
                    UnOp::Neg => write!(f, "-")?,
                }
                // `--x` would lex as two minus signs anyway, but keep it readable
                e.fmt_child(f, 10)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                // left associative, except imply which is right associative
                if *op == BinOp::Imply {
                    l.fmt_child(f, p + 1)?;
                    write!(f, " {} ", op.symbol())?;
                    r.fmt_child(f, p)
                } else {
                    l.fmt_child(f, p)?;
                    write!(f, " {} ", op.symbol())?;
                    r.fmt_child(f, p + 1)
                }
            }
            Expr::Cond(c, a, b) => {
                c.fmt_child(f, 2)?;
                write!(f, " ? ")?;
                a.fmt_child(f, 2)?;
                write!(f, " : ")?;
                b.fmt_child(f, 1)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Runtime value of a variable or expression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(v as f64),
            Value::Real(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Static type of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Int,
    Real,
    Bool,
    Clock,
}

impl Type {
    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Real | Type::Clock)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Type::Int => "int",
            Type::Real => "real",
            Type::Bool => "bool",
            Type::Clock => "clock",
        };
        f.write_str(s)
    }
}

/// Result type of a binary operator, or a description of the mismatch.
pub fn binary_type(op: BinOp, l: Type, r: Type) -> Result<Type, String> {
    if op.is_logical() {
        if l == Type::Bool && r == Type::Bool {
            return Ok(Type::Bool);
        }
        return Err(format!("operator {} needs bool operands, got {l} and {r}", op.symbol()));
    }
    if matches!(op, BinOp::Eq | BinOp::Ne) && l == Type::Bool && r == Type::Bool {
        return Ok(Type::Bool);
    }
    if !l.is_numeric() || !r.is_numeric() {
        return Err(format!(
            "operator {} needs numeric operands, got {l} and {r}",
            op.symbol()
        ));
    }
    if op.is_comparison() {
        return Ok(Type::Bool);
    }
    if op == BinOp::Mod && (l != Type::Int || r != Type::Int) {
        return Err(format!("operator % needs int operands, got {l} and {r}"));
    }
    if l == Type::Int && r == Type::Int {
        Ok(Type::Int)
    } else {
        Ok(Type::Real)
    }
}

/// Compares two numbers, with tolerance when either side is real.
pub fn compare(op: BinOp, a: Value, b: Value) -> Option<bool> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(match op {
            BinOp::Lt => x < y,
            BinOp::Le => x <= y,
            BinOp::Gt => x > y,
            BinOp::Ge => x >= y,
            BinOp::Eq => x == y,
            BinOp::Ne => x != y,
            _ => return None,
        }),
        (Value::Bool(x), Value::Bool(y)) => match op {
            BinOp::Eq => Some(x == y),
            BinOp::Ne => Some(x != y),
            _ => None,
        },
        _ => {
            let x = a.as_f64()?;
            let y = b.as_f64()?;
            Some(compare_f64(op, x, y))
        }
    }
}

pub fn compare_f64(op: BinOp, x: f64, y: f64) -> bool {
    let tol = EPS * (1.0f64).max(x.abs()).max(y.abs());
    match op {
        BinOp::Lt => x < y - tol,
        BinOp::Le => x <= y + tol,
        BinOp::Gt => x > y + tol,
        BinOp::Ge => x >= y - tol,
        BinOp::Eq => (x - y).abs() <= tol,
        BinOp::Ne => (x - y).abs() > tol,
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("type error: {0}")]
    Type(String),
    #[error("non-finite value")]
    NonFinite,
}

pub fn apply_unary(op: UnOp, v: Value) -> Result<Value, EvalError> {
    match (op, v) {
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
        (UnOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
        (op, v) => Err(EvalError::Type(format!("cannot apply {op:?} to {v}"))),
    }
}

pub fn apply_binary(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    if op.is_comparison() {
        return compare(op, a, b)
            .map(Value::Bool)
            .ok_or_else(|| EvalError::Type(format!("cannot compare {a} and {b}")));
    }
    if op.is_logical() {
        return match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(match op {
                BinOp::And => x && y,
                BinOp::Or => x || y,
                _ => !x || y,
            })),
            _ => Err(EvalError::Type(format!("{} needs bool operands", op.symbol()))),
        };
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let r = match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                BinOp::Div | BinOp::Mod if y == 0 => return Err(EvalError::DivisionByZero),
                BinOp::Div => x.checked_div(y),
                BinOp::Mod => x.checked_rem(y),
                _ => unreachable!("arithmetic operator"),
            };
            r.map(Value::Int).ok_or(EvalError::Overflow)
        }
        _ => {
            let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                return Err(EvalError::Type(format!("{} needs numeric operands", op.symbol())));
            };
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div if y == 0.0 => return Err(EvalError::DivisionByZero),
                BinOp::Div => x / y,
                BinOp::Mod => return Err(EvalError::Type("% needs int operands".into())),
                _ => unreachable!("arithmetic operator"),
            };
            Ok(Value::Real(r))
        }
    }
}

pub fn apply_call(func: Func, args: &[Value]) -> Result<Value, EvalError> {
    match (func, args) {
        (Func::Abs, [Value::Int(x)]) => x.checked_abs().map(Value::Int).ok_or(EvalError::Overflow),
        (Func::Abs | Func::Fabs, [v]) => v
            .as_f64()
            .map(|x| Value::Real(x.abs()))
            .ok_or_else(|| EvalError::Type(format!("{} needs a number", func.name()))),
        (Func::Min, [Value::Int(x), Value::Int(y)]) => Ok(Value::Int(*x.min(y))),
        (Func::Max, [Value::Int(x), Value::Int(y)]) => Ok(Value::Int(*x.max(y))),
        (Func::Min | Func::Max, [a, b]) => {
            let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                return Err(EvalError::Type(format!("{} needs numbers", func.name())));
            };
            Ok(Value::Real(if func == Func::Min { x.min(y) } else { x.max(y) }))
        }
        _ => Err(EvalError::Type(format!("bad arguments to {}", func.name()))),
    }
}

/// Infers the static type of `e`; `lookup` gives the type of a name.
pub fn infer_type(e: &Expr, lookup: &dyn Fn(&[String]) -> Result<Type, String>) -> Result<Type, String> {
    match e {
        Expr::Int(_) => Ok(Type::Int),
        Expr::Real(_) => Ok(Type::Real),
        Expr::Bool(_) => Ok(Type::Bool),
        Expr::Name(path) => lookup(path),
        Expr::Unary(UnOp::Not, inner) => match infer_type(inner, lookup)? {
            Type::Bool => Ok(Type::Bool),
            t => Err(format!("operator ! needs a bool operand, got {t}")),
        },
        Expr::Unary(UnOp::Neg, inner) => match infer_type(inner, lookup)? {
            Type::Int => Ok(Type::Int),
            Type::Real | Type::Clock => Ok(Type::Real),
            t => Err(format!("operator - needs a numeric operand, got {t}")),
        },
        Expr::Binary(op, l, r) => binary_type(*op, infer_type(l, lookup)?, infer_type(r, lookup)?),
        Expr::Cond(c, a, b) => {
            if infer_type(c, lookup)? != Type::Bool {
                return Err("condition of ?: must be bool".into());
            }
            let ta = infer_type(a, lookup)?;
            let tb = infer_type(b, lookup)?;
            match (ta, tb) {
                (Type::Bool, Type::Bool) => Ok(Type::Bool),
                (Type::Int, Type::Int) => Ok(Type::Int),
                (x, y) if x.is_numeric() && y.is_numeric() => Ok(Type::Real),
                (x, y) => Err(format!("branches of ?: have types {x} and {y}")),
            }
        }
        Expr::Call(func, args) => {
            if args.len() != func.arity() {
                return Err(format!("{} takes {} argument(s)", func.name(), func.arity()));
            }
            let tys = args
                .iter()
                .map(|a| infer_type(a, lookup))
                .collect::<Result<Vec<_>, _>>()?;
            if tys.iter().any(|t| !t.is_numeric()) {
                return Err(format!("{} needs numeric arguments", func.name()));
            }
            if *func != Func::Fabs && tys.iter().all(|t| *t == Type::Int) {
                Ok(Type::Int)
            } else {
                Ok(Type::Real)
            }
        }
    }
}

/// Evaluates an expression that mentions no names.
pub fn const_eval(e: &Expr) -> Result<Value, String> {
    match e {
        Expr::Int(v) => Ok(Value::Int(*v)),
        Expr::Real(v) => Ok(Value::Real(*v)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Name(path) => Err(format!("`{}` is not a constant", path.join("."))),
        Expr::Unary(op, inner) => apply_unary(*op, const_eval(inner)?).map_err(|e| e.to_string()),
        Expr::Binary(op, l, r) => {
            apply_binary(*op, const_eval(l)?, const_eval(r)?).map_err(|e| e.to_string())
        }
        Expr::Cond(c, a, b) => match const_eval(c)? {
            Value::Bool(true) => const_eval(a),
            Value::Bool(false) => const_eval(b),
            _ => Err("condition of ?: must be bool".into()),
        },
        Expr::Call(func, args) => {
            let vals = args.iter().map(const_eval).collect::<Result<Vec<_>, _>>()?;
            apply_call(*func, &vals).map_err(|e| e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_respects_precedence() {
        let e = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Add, Expr::name("a"), Expr::Int(1)),
            Expr::name("b"),
        );
        assert_eq!(e.to_string(), "(a + 1) * b");
        let e = Expr::binary(
            BinOp::Sub,
            Expr::name("a"),
            Expr::binary(BinOp::Sub, Expr::name("b"), Expr::name("c")),
        );
        assert_eq!(e.to_string(), "a - (b - c)");
    }

    #[test]
    fn reals_keep_a_decimal_point() {
        assert_eq!(Expr::Real(2.0).to_string(), "2.0");
        assert_eq!(Expr::Real(0.1).to_string(), "0.1");
    }

    #[test]
    fn tolerant_real_comparison() {
        assert!(compare_f64(BinOp::Le, 1.0 + 1e-12, 1.0));
        assert!(!compare_f64(BinOp::Lt, 1.0 - 1e-12, 1.0));
        assert!(compare_f64(BinOp::Eq, 0.1 + 0.2, 0.3));
        assert_eq!(compare(BinOp::Lt, Value::Int(1), Value::Int(2)), Some(true));
    }

    #[test]
    fn typing() {
        assert_eq!(binary_type(BinOp::Add, Type::Int, Type::Clock), Ok(Type::Real));
        assert_eq!(binary_type(BinOp::Add, Type::Int, Type::Int), Ok(Type::Int));
        assert!(binary_type(BinOp::Add, Type::Bool, Type::Int).is_err());
        assert!(binary_type(BinOp::And, Type::Bool, Type::Int).is_err());
        assert_eq!(binary_type(BinOp::Eq, Type::Bool, Type::Bool), Ok(Type::Bool));
    }
}
