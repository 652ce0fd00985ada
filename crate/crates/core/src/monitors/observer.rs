//! Observer automata: receive-only templates that move to `fail` when a
//! constraint occurrence is violated. `fail` is a sink.

use std::fmt::Write as _;

use super::constraint::{ConstraintKind, EventBinding, WhConstraint};
use crate::dsl::parse_model;
use crate::expr::fmt_real;
use crate::model::{ChannelKind, Instantiation, Model, Span, Template};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ObserverError {
    #[error("constraint {0}: {1}")]
    Binding(String, String),
    #[error("constraint {0}: component name already used")]
    NameClash(String),
    #[error("constraint {0}: generated observer does not parse: {1}")]
    Internal(String, String),
}

struct Gen {
    locs: Vec<String>,
    edges: Vec<String>,
}

impl Gen {
    fn edge(&mut self, from: &str, to: &str, guard: &str, chan: &str, update: &str) {
        let mut s = format!("{from} -> {to} {{ ");
        if !guard.is_empty() {
            write!(s, "guard {guard}; ").unwrap();
        }
        write!(s, "sync {chan}?; ").unwrap();
        if !update.is_empty() {
            write!(s, "update {update}; ").unwrap();
        }
        s.push('}');
        self.edges.push(s);
    }
}

fn channel<'c>(c: &'c WhConstraint, model: &Model, role: &str) -> Result<Option<&'c str>, ObserverError> {
    match c.binding(role) {
        None => Ok(None),
        Some(b) => bound_channel(c, model, role, b).map(Some),
    }
}

fn bound_channel<'c>(c: &WhConstraint, model: &Model, role: &str, b: &'c EventBinding) -> Result<&'c str, ObserverError> {
    let err = |m: String| Err(ObserverError::Binding(c.name.clone(), m));
    match b {
        EventBinding::Predicate(_) => err(format!("event `{role}` is bound to a predicate; observers need channels")),
        EventBinding::Channel(name) => match model.channels.iter().find(|d| d.name == *name) {
            None => err(format!("unknown channel `{name}`")),
            Some(d) if d.kind == ChannelKind::Binary => {
                err(format!("channel `{name}` is binary; an observer would take part in the handshake"))
            }
            Some(_) => Ok(name),
        },
    }
}

/// DSL text of the observer template for `c`, named `Obs_<constraint>`.
pub fn observer_source(c: &WhConstraint, model: &Model) -> Result<String, ObserverError> {
    let r = fmt_real;
    let mut g = Gen {
        locs: Vec::new(),
        edges: Vec::new(),
    };
    let mut locals = String::new();
    match &c.kind {
        ConstraintKind::Execution { lower, upper } => {
            let start = channel(c, model, "start")?.unwrap();
            let stop = channel(c, model, "stop")?.unwrap();
            locals.push_str("clock eclk;");
            g.locs.extend(
                [
                    "init loc idle { rate eclk = 0; }",
                    "loc exec {}",
                    "loc preempted { rate eclk = 0; }",
                    "loc success { rate eclk = 0; }",
                    "loc fail { rate eclk = 0; }",
                ]
                .map(String::from),
            );
            for from in ["idle", "success"] {
                g.edge(from, "exec", "", start, "eclk := 0");
            }
            if let (Some(p), Some(rs)) = (channel(c, model, "preempt")?, channel(c, model, "resume")?) {
                g.edge("exec", "preempted", "", p, "");
                g.edge("preempted", "exec", "", rs, "");
            }
            g.edge("exec", "success", &format!("eclk >= {} && eclk <= {}", r(*lower), r(*upper)), stop, "");
            g.edge("exec", "fail", &format!("eclk < {}", r(*lower)), stop, "");
            g.edge("exec", "fail", &format!("eclk > {}", r(*upper)), stop, "");
        }
        ConstraintKind::Synchronization { tolerance } => {
            let streams = c
                .sync_streams()
                .into_iter()
                .enumerate()
                .map(|(i, b)| bound_channel(c, model, &format!("e{}", i + 1), b))
                .collect::<Result<Vec<_>, _>>()?;
            for (i, s) in streams.iter().enumerate() {
                if streams[..i].contains(s) {
                    return Err(ObserverError::Binding(
                        c.name.clone(),
                        format!("channel `{s}` is bound to two streams"),
                    ));
                }
            }
            let n = streams.len();
            // two open groups: a (oldest incomplete) and b (next)
            locals.push_str("clock ca; clock cb; int na = 0; int nb = 0;");
            for i in 1..=n {
                write!(locals, " bool a{i} = false; bool b{i} = false;").unwrap();
            }
            g.locs.extend(
                [
                    "init loc wait {}",
                    "loc success {}",
                    "loc fail { rate ca = 0; rate cb = 0; }",
                    "loc overflow { rate ca = 0; rate cb = 0; }",
                ]
                .map(String::from),
            );
            let tol = r(*tolerance);
            let mut shift = String::from("ca := cb, na := nb, nb := 0");
            for i in 1..=n {
                write!(shift, ", a{i} := b{i}, b{i} := false").unwrap();
            }
            for (j, ch) in streams.iter().enumerate() {
                let j = j + 1;
                for from in ["wait", "success"] {
                    g.edge(
                        from,
                        from,
                        &format!("!a{j} && na < {}", n - 1),
                        ch,
                        &format!("ca := (na == 0 ? 0 : ca), a{j} := true, na := na + 1"),
                    );
                    g.edge(
                        from,
                        "success",
                        &format!("!a{j} && na == {} && ca <= {tol}", n - 1),
                        ch,
                        &shift,
                    );
                    g.edge(from, "fail", &format!("!a{j} && na == {} && ca > {tol}", n - 1), ch, "");
                    g.edge(
                        from,
                        from,
                        &format!("a{j} && !b{j}"),
                        ch,
                        &format!("cb := (nb == 0 ? 0 : cb), b{j} := true, nb := nb + 1"),
                    );
                    g.edge(from, "overflow", &format!("a{j} && b{j}"), ch, "");
                }
            }
        }
        ConstraintKind::Periodic {
            lower,
            upper,
            jitter,
            band,
        } => {
            let occ = channel(c, model, "occurrence")?.unwrap();
            let (lo, hi) = band.band(*lower, *upper, *jitter);
            locals.push_str("clock pclk;");
            g.locs.extend(
                [
                    "init loc firstoccurrence { rate pclk = 0; }",
                    "loc judge {}",
                    "loc success {}",
                    "loc fail { rate pclk = 0; }",
                ]
                .map(String::from),
            );
            g.edge("firstoccurrence", "judge", "", occ, "pclk := 0");
            for from in ["judge", "success"] {
                g.edge(from, "success", &format!("pclk >= {} && pclk <= {}", r(lo), r(hi)), occ, "pclk := 0");
                g.edge(from, "fail", &format!("pclk < {}", r(lo)), occ, "");
                g.edge(from, "fail", &format!("pclk > {}", r(hi)), occ, "");
            }
        }
        ConstraintKind::EndToEnd { lower, upper } => {
            let src = channel(c, model, "source")?.unwrap();
            let tgt = channel(c, model, "target")?.unwrap();
            if src == tgt {
                return Err(ObserverError::Binding(
                    c.name.clone(),
                    "source and target share a channel".into(),
                ));
            }
            locals.push_str("clock dclk;");
            g.locs.extend(
                [
                    "init loc idle { rate dclk = 0; }",
                    "loc wait {}",
                    "loc success { rate dclk = 0; }",
                    "loc fail { rate dclk = 0; }",
                    "loc overflow { rate dclk = 0; }",
                ]
                .map(String::from),
            );
            for from in ["idle", "success"] {
                g.edge(from, "wait", "", src, "dclk := 0");
            }
            g.edge("wait", "overflow", "", src, "");
            g.edge("wait", "success", &format!("dclk >= {} && dclk <= {}", r(*lower), r(*upper)), tgt, "");
            g.edge("wait", "fail", &format!("dclk < {}", r(*lower)), tgt, "");
            g.edge("wait", "fail", &format!("dclk > {}", r(*upper)), tgt, "");
        }
    }
    let mut out = format!("template Obs_{}() {{\n  {locals}\n", c.name);
    for l in &g.locs {
        writeln!(out, "  {l}").unwrap();
    }
    for e in &g.edges {
        writeln!(out, "  {e}").unwrap();
    }
    out.push('}');
    Ok(out)
}

pub fn build_observer(c: &WhConstraint, model: &Model) -> Result<Template, ObserverError> {
    let src = observer_source(c, model)?;
    let mut m = parse_model(&format!("{src}\nsystem Obs_{};", c.name))
        .map_err(|e| ObserverError::Internal(c.name.clone(), e.to_string()))?;
    Ok(m.templates.remove(0))
}

/// Appends one observer per constraint, instantiated under the constraint's name.
pub fn compose(model: &Model, constraints: &[WhConstraint]) -> Result<Model, ObserverError> {
    let mut out = model.clone();
    for c in constraints {
        if out.component_names().contains(&c.name) || out.template(&format!("Obs_{}", c.name)).is_some() {
            return Err(ObserverError::NameClash(c.name.clone()));
        }
        out.templates.push(build_observer(c, model)?);
        out.system.push(Instantiation {
            alias: Some(c.name.clone()),
            template: format!("Obs_{}", c.name),
            args: Vec::new(),
            span: Span::default(),
        });
    }
    Ok(out)
}
