//! Instantiated network: templates expanded into components, names resolved
//! to slots, expressions compiled for fast evaluation.

use std::collections::HashMap;

use crate::expr::{
    apply_binary, apply_call, apply_unary, const_eval, infer_type, BinOp, EvalError, Expr, Func,
    Type, UnOp, Value,
};
use crate::model::{ChannelKind, LocationKind, Model, SyncDir};
use crate::validate::{classify, mentions, validate_model, Conjunct, ValidationReport};

#[derive(Clone, Debug, PartialEq)]
pub enum CExpr {
    Const(Value),
    Var(usize),
    Clock(usize),
    /// Component `.0` is in location `.1`.
    At(usize, usize),
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Cond(Box<CExpr>, Box<CExpr>, Box<CExpr>),
    Call(Func, Vec<CExpr>),
}

/// Read-only view of a state for expression evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub locs: &'a [usize],
    pub vars: &'a [Value],
    pub clocks: &'a [f64],
}

impl CExpr {
    pub fn eval(&self, env: &Env) -> Result<Value, EvalError> {
        match self {
            CExpr::Const(v) => Ok(*v),
            CExpr::Var(i) => Ok(env.vars[*i]),
            CExpr::Clock(i) => Ok(Value::Real(env.clocks[*i])),
            CExpr::At(c, l) => Ok(Value::Bool(env.locs[*c] == *l)),
            CExpr::Unary(op, e) => apply_unary(*op, e.eval(env)?),
            CExpr::Binary(op, l, r) => {
                if op.is_logical() {
                    let a = l.eval_bool(env)?;
                    match (op, a) {
                        (BinOp::And, false) => return Ok(Value::Bool(false)),
                        (BinOp::Or, true) => return Ok(Value::Bool(true)),
                        (BinOp::Imply, false) => return Ok(Value::Bool(true)),
                        _ => return Ok(Value::Bool(r.eval_bool(env)?)),
                    }
                }
                apply_binary(*op, l.eval(env)?, r.eval(env)?)
            }
            CExpr::Cond(c, a, b) => {
                if c.eval_bool(env)? {
                    a.eval(env)
                } else {
                    b.eval(env)
                }
            }
            CExpr::Call(f, args) => {
                let vals = args.iter().map(|a| a.eval(env)).collect::<Result<Vec<_>, _>>()?;
                apply_call(*f, &vals)
            }
        }
    }

    pub fn eval_bool(&self, env: &Env) -> Result<bool, EvalError> {
        match self.eval(env)? {
            Value::Bool(b) => Ok(b),
            v => Err(EvalError::Type(format!("expected bool, got {v}"))),
        }
    }

    pub fn eval_f64(&self, env: &Env) -> Result<f64, EvalError> {
        self.eval(env)?
            .as_f64()
            .ok_or_else(|| EvalError::Type("expected a number".into()))
    }

    /// True iff some clock reference satisfies `pred`.
    pub fn reads_clock(&self, pred: &dyn Fn(usize) -> bool) -> bool {
        match self {
            CExpr::Clock(c) => pred(*c),
            CExpr::Const(_) | CExpr::Var(_) | CExpr::At(..) => false,
            CExpr::Unary(_, e) => e.reads_clock(pred),
            CExpr::Binary(_, l, r) => l.reads_clock(pred) || r.reads_clock(pred),
            CExpr::Cond(c, a, b) => c.reads_clock(pred) || a.reads_clock(pred) || b.reads_clock(pred),
            CExpr::Call(_, args) => args.iter().any(|a| a.reads_clock(pred)),
        }
    }

    pub fn depends_on_clocks(&self) -> bool {
        match self {
            CExpr::Clock(_) => true,
            CExpr::Const(_) | CExpr::Var(_) | CExpr::At(..) => false,
            CExpr::Unary(_, e) => e.depends_on_clocks(),
            CExpr::Binary(_, l, r) => l.depends_on_clocks() || r.depends_on_clocks(),
            CExpr::Cond(c, a, b) => {
                c.depends_on_clocks() || a.depends_on_clocks() || b.depends_on_clocks()
            }
            CExpr::Call(_, args) => args.iter().any(CExpr::depends_on_clocks),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarSlot {
    pub name: String,
    pub ty: Type,
    pub init: Value,
    pub owner: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClockSlot {
    pub name: String,
    pub init: f64,
    pub owner: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub name: String,
    pub kind: ChannelKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Var(usize),
    Clock(usize),
}

/// `clock op bound`, with `bound` clock-free.
#[derive(Clone, Debug, PartialEq)]
pub struct ClockAtom {
    pub clock: usize,
    pub op: BinOp,
    pub bound: CExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub atoms: Vec<ClockAtom>,
    pub plain: Vec<CExpr>,
    pub full: CExpr,
}

impl Constraint {
    pub fn holds(&self, env: &Env) -> Result<bool, EvalError> {
        self.full.eval_bool(env)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rate {
    pub clock: usize,
    pub expr: CExpr,
    pub clock_dependent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CLocation {
    pub name: String,
    pub committed: bool,
    pub invariant: Option<Constraint>,
    pub rates: Vec<Rate>,
    pub exit_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CEdge {
    pub source: usize,
    pub target: usize,
    pub guard: Option<Constraint>,
    pub sync: Option<(usize, SyncDir)>,
    pub weight: f64,
    pub updates: Vec<(Slot, CExpr)>,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub name: String,
    pub template: String,
    pub locations: Vec<CLocation>,
    pub edges: Vec<CEdge>,
    /// Edge indices leaving each location.
    pub outgoing: Vec<Vec<usize>>,
    pub initial: usize,
    params: HashMap<String, Value>,
    locals: HashMap<String, Slot>,
}

impl Component {
    pub fn location(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InstantiateError {
    #[error("model has validation errors:\n{0}")]
    Invalid(ValidationReport),
    #[error("internal error while compiling the model: {0}")]
    Internal(String),
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ResolveError(pub String);

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub vars: Vec<VarSlot>,
    pub clocks: Vec<ClockSlot>,
    pub channels: Vec<Channel>,
    pub components: Vec<Component>,
    /// For each channel, the components having at least one receiving edge on it.
    pub receivers: Vec<Vec<usize>>,
    global_vars: HashMap<String, Slot>,
    defines: HashMap<String, (CExpr, Type)>,
}

fn coerce(ty: Type, v: Value) -> Value {
    match (ty, v) {
        (Type::Real, Value::Int(i)) => Value::Real(i as f64),
        _ => v,
    }
}

fn default_value(ty: Type) -> Value {
    match ty {
        Type::Int => Value::Int(0),
        Type::Bool => Value::Bool(false),
        Type::Real | Type::Clock => Value::Real(0.0),
    }
}

/// Expands a model into a network; runs validation first.
pub fn instantiate(model: &Model) -> Result<Network, InstantiateError> {
    let report = validate_model(model);
    if !report.is_ok() {
        return Err(InstantiateError::Invalid(report));
    }
    let internal = |m: String| InstantiateError::Internal(m);
    let mut net = Network {
        vars: Vec::new(),
        clocks: Vec::new(),
        channels: Vec::new(),
        components: Vec::new(),
        receivers: Vec::new(),
        global_vars: HashMap::new(),
        defines: HashMap::new(),
    };
    for v in &model.globals {
        let init = match &v.init {
            Some(e) => const_eval(e).map_err(internal)?,
            None => default_value(v.ty),
        };
        let slot = if v.ty == Type::Clock {
            net.clocks.push(ClockSlot {
                name: v.name.clone(),
                init: init.as_f64().ok_or_else(|| internal(format!("clock {} init", v.name)))?,
                owner: None,
            });
            Slot::Clock(net.clocks.len() - 1)
        } else {
            net.vars.push(VarSlot {
                name: v.name.clone(),
                ty: v.ty,
                init: coerce(v.ty, init),
                owner: None,
            });
            Slot::Var(net.vars.len() - 1)
        };
        net.global_vars.insert(v.name.clone(), slot);
    }
    for c in &model.channels {
        net.channels.push(Channel {
            name: c.name.clone(),
            kind: c.kind,
        });
    }
    for d in &model.defines {
        let (ce, ty) = net
            .compile_in(&d.expr, None)
            .map_err(|e| internal(format!("define {}: {e}", d.name)))?;
        net.defines.insert(d.name.clone(), (ce, ty));
    }

    let names = model.component_names();
    for (ci, (inst, name)) in model.system.iter().zip(names).enumerate() {
        let t = model
            .template(&inst.template)
            .ok_or_else(|| internal(format!("template {}", inst.template)))?;
        let mut comp = Component {
            name: name.clone(),
            template: t.name.clone(),
            locations: Vec::new(),
            edges: Vec::new(),
            outgoing: vec![Vec::new(); t.locations.len()],
            initial: t.initial().ok_or_else(|| internal("initial location".into()))?,
            params: HashMap::new(),
            locals: HashMap::new(),
        };
        for (p, a) in t.params.iter().zip(&inst.args) {
            let v = const_eval(a).map_err(internal)?;
            comp.params.insert(p.name.clone(), coerce(p.ty, v));
        }
        for v in &t.locals {
            let init = match &v.init {
                Some(e) => const_eval(e).map_err(internal)?,
                None => default_value(v.ty),
            };
            let qualified = format!("{name}.{}", v.name);
            let slot = if v.ty == Type::Clock {
                net.clocks.push(ClockSlot {
                    name: qualified,
                    init: init.as_f64().ok_or_else(|| internal(format!("clock {} init", v.name)))?,
                    owner: Some(ci),
                });
                Slot::Clock(net.clocks.len() - 1)
            } else {
                net.vars.push(VarSlot {
                    name: qualified,
                    ty: v.ty,
                    init: coerce(v.ty, init),
                    owner: Some(ci),
                });
                Slot::Var(net.vars.len() - 1)
            };
            comp.locals.insert(v.name.clone(), slot);
        }
        net.components.push(comp);

        let mut locations = Vec::new();
        for l in &t.locations {
            let invariant = match &l.invariant {
                Some(e) => Some(net.compile_constraint(e, ci).map_err(internal)?),
                None => None,
            };
            let mut rates = Vec::new();
            for r in &l.rates {
                let clock = match net.lookup_local_or_global(ci, &r.clock) {
                    Some(Slot::Clock(c)) => c,
                    _ => return Err(internal(format!("rate target {}", r.clock))),
                };
                let (expr, _) = net.compile_in(&r.expr, Some(ci)).map_err(|e| internal(e.0))?;
                let clock_dependent = expr.depends_on_clocks();
                rates.push(Rate {
                    clock,
                    expr,
                    clock_dependent,
                });
            }
            locations.push(CLocation {
                name: l.name.clone(),
                committed: l.kind == LocationKind::Committed,
                invariant,
                rates,
                exit_rate: l.exit_rate.unwrap_or(1.0),
            });
        }
        let mut edges = Vec::new();
        for e in &t.edges {
            let source = t.location(&e.source).ok_or_else(|| internal(e.source.clone()))?;
            let target = t.location(&e.target).ok_or_else(|| internal(e.target.clone()))?;
            let guard = match &e.guard {
                Some(g) => Some(net.compile_constraint(g, ci).map_err(internal)?),
                None => None,
            };
            let sync = match &e.sync {
                Some(s) => Some((
                    net.channel(&s.channel)
                        .ok_or_else(|| internal(format!("channel {}", s.channel)))?,
                    s.dir,
                )),
                None => None,
            };
            let mut updates = Vec::new();
            for a in &e.updates {
                let slot = net
                    .lookup_local_or_global(ci, &a.target)
                    .ok_or_else(|| internal(format!("update target {}", a.target)))?;
                let (expr, _) = net.compile_in(&a.expr, Some(ci)).map_err(|e| internal(e.0))?;
                updates.push((slot, expr));
            }
            edges.push(CEdge {
                source,
                target,
                guard,
                sync,
                weight: e.weight,
                updates,
                label: format!("{}->{}", e.source, e.target),
            });
        }
        let comp = &mut net.components[ci];
        for (i, e) in edges.iter().enumerate() {
            comp.outgoing[e.source].push(i);
        }
        comp.locations = locations;
        comp.edges = edges;
    }

    net.receivers = vec![Vec::new(); net.channels.len()];
    for (ci, comp) in net.components.iter().enumerate() {
        for e in &comp.edges {
            if let Some((ch, SyncDir::Receive)) = e.sync {
                if !net.receivers[ch].contains(&ci) {
                    net.receivers[ch].push(ci);
                }
            }
        }
    }
    Ok(net)
}

impl Network {
    pub fn channel(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn component(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn clock(&self, name: &str) -> Option<usize> {
        self.clocks.iter().position(|c| c.name == name)
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|c| c.name == name)
    }

    fn lookup_local_or_global(&self, comp: usize, name: &str) -> Option<Slot> {
        self.components[comp]
            .locals
            .get(name)
            .or_else(|| self.global_vars.get(name))
            .copied()
    }

    fn slot_expr(&self, slot: Slot) -> (CExpr, Type) {
        match slot {
            Slot::Var(i) => (CExpr::Var(i), self.vars[i].ty),
            Slot::Clock(i) => (CExpr::Clock(i), Type::Clock),
        }
    }

    fn value_type(v: Value) -> Type {
        match v {
            Value::Int(_) => Type::Int,
            Value::Real(_) => Type::Real,
            Value::Bool(_) => Type::Bool,
        }
    }

    fn resolve_name(&self, path: &[String], comp: Option<usize>) -> Result<(CExpr, Type), ResolveError> {
        let full = path.join(".");
        match path {
            [name] => {
                if let Some(ci) = comp {
                    let c = &self.components[ci];
                    if let Some(v) = c.params.get(name) {
                        return Ok((CExpr::Const(*v), Self::value_type(*v)));
                    }
                    if let Some(s) = c.locals.get(name) {
                        return Ok(self.slot_expr(*s));
                    }
                }
                if let Some(s) = self.global_vars.get(name) {
                    return Ok(self.slot_expr(*s));
                }
                if let Some((e, t)) = self.defines.get(name) {
                    return Ok((e.clone(), *t));
                }
                if comp.is_none() {
                    // fall back to a component-local name that is unique network-wide
                    let hits: Vec<(CExpr, Type)> = self
                        .components
                        .iter()
                        .filter_map(|c| c.locals.get(name).map(|s| self.slot_expr(*s)))
                        .collect();
                    match hits.len() {
                        1 => return Ok(hits.into_iter().next().unwrap()),
                        0 => {}
                        _ => {
                            return Err(ResolveError(format!(
                                "`{name}` is ambiguous; qualify it with a component name"
                            )))
                        }
                    }
                }
                Err(ResolveError(format!("unknown identifier `{full}`")))
            }
            [cname, member] => {
                let ci = self
                    .component(cname)
                    .ok_or_else(|| ResolveError(format!("unknown component `{cname}` in `{full}`")))?;
                let c = &self.components[ci];
                if let Some(li) = c.location(member) {
                    return Ok((CExpr::At(ci, li), Type::Bool));
                }
                if let Some(s) = c.locals.get(member) {
                    return Ok(self.slot_expr(*s));
                }
                if let Some(v) = c.params.get(member) {
                    return Ok((CExpr::Const(*v), Self::value_type(*v)));
                }
                Err(ResolveError(format!("`{cname}` has no location or variable `{member}`")))
            }
            _ => Err(ResolveError(format!("cannot resolve `{full}`"))),
        }
    }

    fn compile_in(&self, e: &Expr, comp: Option<usize>) -> Result<(CExpr, Type), ResolveError> {
        let ce = self.lower(e, comp)?;
        let ty = infer_type(e, &|p| self.resolve_name(p, comp).map(|(_, t)| t).map_err(|e| e.0))
            .map_err(ResolveError)?;
        Ok((ce, ty))
    }

    fn lower(&self, e: &Expr, comp: Option<usize>) -> Result<CExpr, ResolveError> {
        Ok(match e {
            Expr::Int(v) => CExpr::Const(Value::Int(*v)),
            Expr::Real(v) => CExpr::Const(Value::Real(*v)),
            Expr::Bool(b) => CExpr::Const(Value::Bool(*b)),
            Expr::Name(p) => self.resolve_name(p, comp)?.0,
            Expr::Unary(op, inner) => CExpr::Unary(*op, Box::new(self.lower(inner, comp)?)),
            Expr::Binary(op, l, r) => CExpr::Binary(
                *op,
                Box::new(self.lower(l, comp)?),
                Box::new(self.lower(r, comp)?),
            ),
            Expr::Cond(c, a, b) => CExpr::Cond(
                Box::new(self.lower(c, comp)?),
                Box::new(self.lower(a, comp)?),
                Box::new(self.lower(b, comp)?),
            ),
            Expr::Call(f, args) => CExpr::Call(
                *f,
                args.iter()
                    .map(|a| self.lower(a, comp))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    fn compile_constraint(&self, e: &Expr, comp: usize) -> Result<Constraint, String> {
        let is_clock = |p: &[String]| {
            matches!(self.resolve_name(p, Some(comp)), Ok((CExpr::Clock(_), _)))
        };
        let timed = |p: &[String]| {
            self.resolve_name(p, Some(comp))
                .map(|(c, _)| c.depends_on_clocks())
                .unwrap_or(false)
        };
        let parts = classify(e, &is_clock, &timed)?;
        let mut atoms = Vec::new();
        let mut plain = Vec::new();
        for part in parts {
            match part {
                Conjunct::Plain(p) => plain.push(self.lower(p, Some(comp)).map_err(|e| e.0)?),
                Conjunct::Atom { clock, op, bound } => {
                    let Ok((CExpr::Clock(c), _)) = self.resolve_name(clock, Some(comp)) else {
                        return Err(format!("clock {}", clock.join(".")));
                    };
                    atoms.push(ClockAtom {
                        clock: c,
                        op,
                        bound: self.lower(bound, Some(comp)).map_err(|e| e.0)?,
                    });
                }
            }
        }
        Ok(Constraint {
            atoms,
            plain,
            full: self.lower(e, Some(comp)).map_err(|e| e.0)?,
        })
    }

    /// Compiles a query-level expression (qualified names allowed).
    pub fn compile_expr(&self, e: &Expr) -> Result<(CExpr, Type), ResolveError> {
        self.compile_in(e, None)
    }

    /// Compiles a query-level boolean expression.
    pub fn compile_predicate(&self, e: &Expr) -> Result<CExpr, ResolveError> {
        let (c, t) = self.compile_expr(e)?;
        if t != Type::Bool {
            return Err(ResolveError(format!("`{e}` has type {t}, expected bool")));
        }
        Ok(c)
    }

    /// Compiles a query-level numeric expression.
    pub fn compile_numeric(&self, e: &Expr) -> Result<CExpr, ResolveError> {
        let (c, t) = self.compile_expr(e)?;
        if !t.is_numeric() {
            return Err(ResolveError(format!("`{e}` has type {t}, expected a number")));
        }
        Ok(c)
    }

    /// True if `e` only mentions names resolvable in this network.
    pub fn resolves(&self, e: &Expr) -> bool {
        !mentions(e, &|p| self.resolve_name(p, None).is_err())
    }
}
