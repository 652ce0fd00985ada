//! Static checks on a parsed [`Model`]. Problems are reported as data.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{const_eval, infer_type, BinOp, Expr, Type, Value};
use crate::model::{ChannelKind, LocationKind, Model, Span, Template};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueCode {
    DuplicateName,
    NoInitialLocation,
    MultipleInitialLocations,
    UnknownLocation,
    NonpositiveWeight,
    UnknownChannel,
    UnknownIdentifier,
    UnknownTemplate,
    ArityMismatch,
    NonConstant,
    TypeMismatch,
    NonlinearClockConstraint,
    RateTarget,
    DuplicateRate,
    BadExitRate,
    QualifiedName,
    BadAssignment,
    EmptySystem,
    CommittedRate,
}

impl IssueCode {
    pub fn text(self) -> &'static str {
        match self {
            IssueCode::DuplicateName => "duplicate name",
            IssueCode::NoInitialLocation => "no initial location",
            IssueCode::MultipleInitialLocations => "multiple initial locations",
            IssueCode::UnknownLocation => "unknown location",
            IssueCode::NonpositiveWeight => "nonpositive weight",
            IssueCode::UnknownChannel => "unknown channel",
            IssueCode::UnknownIdentifier => "unknown identifier",
            IssueCode::UnknownTemplate => "unknown template",
            IssueCode::ArityMismatch => "arity mismatch",
            IssueCode::NonConstant => "non-constant value",
            IssueCode::TypeMismatch => "type mismatch",
            IssueCode::NonlinearClockConstraint => "nonlinear clock constraint",
            IssueCode::RateTarget => "rate target is not a clock",
            IssueCode::DuplicateRate => "duplicate rate",
            IssueCode::BadExitRate => "invalid exit rate",
            IssueCode::QualifiedName => "qualified name in model",
            IssueCode::BadAssignment => "invalid assignment",
            IssueCode::EmptySystem => "empty system",
            IssueCode::CommittedRate => "rate on committed location",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    pub span: Option<Span>,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.span {
            write!(f, "{s}: ")?;
        }
        write!(f, "{}: {}", self.code, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.errors.iter().chain(&self.warnings).any(|i| i.code == code)
    }

    fn error(&mut self, code: IssueCode, span: Span, message: String) {
        self.errors.push(Issue {
            code,
            message,
            span: Some(span),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        write!(
            f,
            "{} error(s), {} warning(s)",
            self.errors.len(),
            self.warnings.len()
        )
    }
}

/// One conjunct of a guard or invariant.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Conjunct<'a> {
    /// Clock-free boolean expression.
    Plain(&'a Expr),
    /// `clock op bound` with a clock-free bound (operands already flipped if needed).
    Atom {
        clock: &'a [String],
        op: BinOp,
        bound: &'a Expr,
    },
}

pub(crate) fn mentions(e: &Expr, pred: &dyn Fn(&[String]) -> bool) -> bool {
    let mut found = false;
    e.visit_names(&mut |p| found |= pred(p));
    found
}

/// Splits a constraint into clock-free conjuncts and simple clock bounds.
///
/// `is_clock` recognises clock names; `timed` also recognises names whose
/// value changes with time (clocks and macros over clocks).
pub(crate) fn classify<'a>(
    e: &'a Expr,
    is_clock: &dyn Fn(&[String]) -> bool,
    timed: &dyn Fn(&[String]) -> bool,
) -> Result<Vec<Conjunct<'a>>, String> {
    let mut out = Vec::new();
    for c in e.conjuncts() {
        if !mentions(c, timed) {
            out.push(Conjunct::Plain(c));
            continue;
        }
        let Expr::Binary(op, l, r) = c else {
            return Err(format!("`{c}` is not a comparison of a clock with a clock-free bound"));
        };
        if !op.is_comparison() || *op == BinOp::Ne {
            return Err(format!("`{c}` is not a comparison of a clock with a clock-free bound"));
        }
        let atom = match (&**l, &**r) {
            (Expr::Name(p), other) if is_clock(p) && !mentions(other, timed) => Conjunct::Atom {
                clock: p,
                op: *op,
                bound: other,
            },
            (other, Expr::Name(p)) if is_clock(p) && !mentions(other, timed) => Conjunct::Atom {
                clock: p,
                op: op.flipped(),
                bound: other,
            },
            _ => {
                return Err(format!(
                    "`{c}` is not a comparison of a clock with a clock-free bound"
                ))
            }
        };
        out.push(atom);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Sym {
    Var(Type),
    Param(Type),
    Channel,
    /// Type, and whether the value depends on clocks.
    Define(Type, bool),
}

struct Scope<'a> {
    globals: &'a HashMap<String, Sym>,
    locals: HashMap<String, Sym>,
}

impl Scope<'_> {
    fn get(&self, name: &str) -> Option<Sym> {
        self.locals.get(name).or_else(|| self.globals.get(name)).copied()
    }

    fn type_of(&self, path: &[String]) -> Result<Type, String> {
        if path.len() != 1 {
            return Err(format!("qualified name `{}`", path.join(".")));
        }
        match self.get(&path[0]) {
            Some(Sym::Var(t)) | Some(Sym::Param(t)) | Some(Sym::Define(t, _)) => Ok(t),
            Some(Sym::Channel) => Err(format!("channel `{}` used as a value", path[0])),
            None => Err(format!("unknown identifier `{}`", path[0])),
        }
    }

    fn is_clock(&self, path: &[String]) -> bool {
        path.len() == 1 && self.get(&path[0]) == Some(Sym::Var(Type::Clock))
    }

    fn is_timed(&self, path: &[String]) -> bool {
        path.len() == 1
            && matches!(
                self.get(&path[0]),
                Some(Sym::Var(Type::Clock)) | Some(Sym::Define(_, true))
            )
    }

    /// Type of `e`, or an issue code and message.
    fn check(&self, e: &Expr) -> Result<Type, (IssueCode, String)> {
        let mut first: Option<(IssueCode, String)> = None;
        e.visit_names(&mut |p| {
            if first.is_some() {
                return;
            }
            if p.len() != 1 {
                first = Some((IssueCode::QualifiedName, format!("`{}` cannot be used inside a model", p.join("."))));
            } else if self.get(&p[0]).is_none() {
                first = Some((IssueCode::UnknownIdentifier, format!("`{}`", p[0])));
            }
        });
        if let Some(err) = first {
            return Err(err);
        }
        infer_type(e, &|p| self.type_of(p)).map_err(|m| (IssueCode::TypeMismatch, m))
    }
}

fn assignable(target: Type, value: Type) -> bool {
    match target {
        Type::Int => value == Type::Int,
        Type::Bool => value == Type::Bool,
        Type::Real | Type::Clock => value.is_numeric(),
    }
}

fn value_type(v: Value) -> Type {
    match v {
        Value::Int(_) => Type::Int,
        Value::Real(_) => Type::Real,
        Value::Bool(_) => Type::Bool,
    }
}

fn check_init(report: &mut ValidationReport, name: &str, ty: Type, init: Option<&Expr>, span: Span) {
    let Some(e) = init else { return };
    match const_eval(e) {
        Ok(v) if assignable(ty, value_type(v)) => {}
        Ok(v) => report.error(
            IssueCode::TypeMismatch,
            span,
            format!("`{name}` has type {ty} but is initialised with {v}"),
        ),
        Err(m) => report.error(IssueCode::NonConstant, span, format!("initialiser of `{name}`: {m}")),
    }
}

pub fn validate_model(model: &Model) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut globals: HashMap<String, Sym> = HashMap::new();

    for v in &model.globals {
        if globals.insert(v.name.clone(), Sym::Var(v.ty)).is_some() {
            report.error(IssueCode::DuplicateName, v.span, format!("`{}` declared twice", v.name));
        }
        check_init(&mut report, &v.name, v.ty, v.init.as_ref(), v.span);
    }
    for c in &model.channels {
        if globals.insert(c.name.clone(), Sym::Channel).is_some() {
            report.error(IssueCode::DuplicateName, c.span, format!("`{}` declared twice", c.name));
        }
    }
    for d in &model.defines {
        let (ty, timed) = {
            let scope = Scope {
                globals: &globals,
                locals: HashMap::new(),
            };
            let timed = mentions(&d.expr, &|p| scope.is_timed(p));
            match scope.check(&d.expr) {
                Ok(t) => (if t == Type::Clock { Type::Real } else { t }, timed),
                Err((code, m)) => {
                    report.error(code, d.span, format!("in define `{}`: {m}", d.name));
                    (Type::Real, timed)
                }
            }
        };
        if globals.insert(d.name.clone(), Sym::Define(ty, timed)).is_some() {
            report.error(IssueCode::DuplicateName, d.span, format!("`{}` declared twice", d.name));
        }
    }

    let mut template_names = HashSet::new();
    for t in &model.templates {
        if !template_names.insert(t.name.as_str()) {
            report.error(IssueCode::DuplicateName, t.span, format!("template `{}` declared twice", t.name));
        }
        validate_template(&mut report, &globals, t);
    }

    if model.system.is_empty() {
        report.errors.push(Issue {
            code: IssueCode::EmptySystem,
            message: "the system instantiates no components".into(),
            span: None,
        });
    }
    let names = model.component_names();
    let mut seen = HashSet::new();
    for (inst, name) in model.system.iter().zip(&names) {
        if !seen.insert(name.as_str()) {
            report.error(IssueCode::DuplicateName, inst.span, format!("component `{name}` declared twice"));
        }
        let Some(t) = model.template(&inst.template) else {
            report.error(IssueCode::UnknownTemplate, inst.span, format!("`{}`", inst.template));
            continue;
        };
        if t.params.len() != inst.args.len() {
            report.error(
                IssueCode::ArityMismatch,
                inst.span,
                format!("`{}` takes {} argument(s), got {}", t.name, t.params.len(), inst.args.len()),
            );
            continue;
        }
        for (p, a) in t.params.iter().zip(&inst.args) {
            match const_eval(a) {
                Ok(v) if p.ty != Type::Clock && assignable(p.ty, value_type(v)) => {}
                Ok(v) => report.error(
                    IssueCode::TypeMismatch,
                    inst.span,
                    format!("parameter `{}` of `{}` has type {} but got {v}", p.name, t.name, p.ty),
                ),
                Err(m) => report.error(IssueCode::NonConstant, inst.span, format!("argument `{a}`: {m}")),
            }
        }
    }
    report
}

fn validate_template(report: &mut ValidationReport, globals: &HashMap<String, Sym>, t: &Template) {
    let ctx = |what: String| format!("template {}: {what}", t.name);
    let mut scope = Scope {
        globals,
        locals: HashMap::new(),
    };
    let mut local_names = HashSet::new();
    for p in &t.params {
        if !local_names.insert(p.name.clone()) {
            report.error(IssueCode::DuplicateName, t.span, ctx(format!("`{}` declared twice", p.name)));
        }
        if p.ty == Type::Clock {
            report.error(IssueCode::TypeMismatch, t.span, ctx(format!("parameter `{}` cannot be a clock", p.name)));
        }
        scope.locals.insert(p.name.clone(), Sym::Param(p.ty));
    }
    for v in &t.locals {
        if !local_names.insert(v.name.clone()) {
            report.error(IssueCode::DuplicateName, v.span, ctx(format!("`{}` declared twice", v.name)));
        }
        check_init(report, &v.name, v.ty, v.init.as_ref(), v.span);
        scope.locals.insert(v.name.clone(), Sym::Var(v.ty));
    }

    let mut loc_names = HashSet::new();
    for l in &t.locations {
        if !loc_names.insert(l.name.as_str()) || local_names.contains(&l.name) {
            report.error(IssueCode::DuplicateName, l.span, ctx(format!("location `{}` declared twice", l.name)));
        }
    }
    match t.locations.iter().filter(|l| l.initial).count() {
        0 => report.error(IssueCode::NoInitialLocation, t.span, ctx("no location is marked init".into())),
        1 => {}
        n => report.error(
            IssueCode::MultipleInitialLocations,
            t.span,
            ctx(format!("{n} locations are marked init")),
        ),
    }

    let is_clock = |p: &[String]| scope.is_clock(p);
    let timed = |p: &[String]| scope.is_timed(p);
    let check_constraint = |report: &mut ValidationReport, e: &Expr, span: Span, what: String| {
        match scope.check(e) {
            Ok(Type::Bool) => {}
            Ok(ty) => {
                report.error(IssueCode::TypeMismatch, span, ctx(format!("{what} has type {ty}, expected bool")));
                return;
            }
            Err((code, m)) => {
                report.error(code, span, ctx(format!("{what}: {m}")));
                return;
            }
        }
        if let Err(m) = classify(e, &is_clock, &timed) {
            report.error(IssueCode::NonlinearClockConstraint, span, ctx(format!("{what}: {m}")));
        }
    };

    for l in &t.locations {
        if let Some(inv) = &l.invariant {
            check_constraint(report, inv, l.span, format!("invariant of `{}`", l.name));
        }
        let mut rated = HashSet::new();
        for r in &l.rates {
            if !scope.is_clock(std::slice::from_ref(&r.clock)) {
                report.error(IssueCode::RateTarget, l.span, ctx(format!("`{}` in location `{}`", r.clock, l.name)));
            }
            if !rated.insert(r.clock.as_str()) {
                report.error(IssueCode::DuplicateRate, l.span, ctx(format!("`{}` in location `{}`", r.clock, l.name)));
            }
            match scope.check(&r.expr) {
                Ok(ty) if ty.is_numeric() => {}
                Ok(ty) => report.error(
                    IssueCode::TypeMismatch,
                    l.span,
                    ctx(format!("rate of `{}` has type {ty}", r.clock)),
                ),
                Err((code, m)) => report.error(code, l.span, ctx(format!("rate of `{}`: {m}", r.clock))),
            }
        }
        if l.kind == LocationKind::Committed && !l.rates.is_empty() {
            report.warnings.push(Issue {
                code: IssueCode::CommittedRate,
                message: ctx(format!("location `{}` is committed, its rates never apply", l.name)),
                span: Some(l.span),
            });
        }
        if let Some(x) = l.exit_rate {
            if !(x > 0.0 && x.is_finite()) {
                report.error(IssueCode::BadExitRate, l.span, ctx(format!("exit rate {x} of `{}` must be positive", l.name)));
            }
        }
    }

    for e in &t.edges {
        let label = format!("edge {}->{}", e.source, e.target);
        for end in [&e.source, &e.target] {
            if t.location(end).is_none() {
                report.error(IssueCode::UnknownLocation, e.span, ctx(format!("{label}: `{end}`")));
            }
        }
        if !(e.weight > 0.0 && e.weight.is_finite()) {
            report.error(
                IssueCode::NonpositiveWeight,
                e.span,
                ctx(format!("{label} has weight {}", e.weight)),
            );
        }
        if let Some(s) = &e.sync {
            if globals.get(&s.channel) != Some(&Sym::Channel) || scope.locals.contains_key(&s.channel) {
                report.error(IssueCode::UnknownChannel, e.span, ctx(format!("{label}: `{}`", s.channel)));
            }
        }
        if let Some(g) = &e.guard {
            check_constraint(report, g, e.span, format!("guard of {label}"));
        }
        for a in &e.updates {
            let target_ty = match scope.get(&a.target) {
                Some(Sym::Var(ty)) => ty,
                Some(_) => {
                    report.error(
                        IssueCode::BadAssignment,
                        e.span,
                        ctx(format!("{label}: `{}` is not a variable", a.target)),
                    );
                    continue;
                }
                None => {
                    report.error(IssueCode::UnknownIdentifier, e.span, ctx(format!("{label}: `{}`", a.target)));
                    continue;
                }
            };
            match scope.check(&a.expr) {
                Ok(ty) if assignable(target_ty, ty) => {}
                Ok(ty) => report.error(
                    IssueCode::TypeMismatch,
                    e.span,
                    ctx(format!("{label}: cannot assign {ty} to `{}` of type {target_ty}", a.target)),
                ),
                Err((code, m)) => report.error(code, e.span, ctx(format!("{label}: {m}"))),
            }
        }
    }
}

/// Names of channels declared with the given kind.
pub fn channels_of_kind(model: &Model, kind: ChannelKind) -> Vec<&str> {
    model
        .channels
        .iter()
        .filter(|c| c.kind == kind)
        .map(|c| c.name.as_str())
        .collect()
}
