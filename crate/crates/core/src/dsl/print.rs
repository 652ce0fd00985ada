use std::fmt::Write;

use crate::expr::{fmt_real, Type};
use crate::model::{ChannelKind, LocationKind, Model, SyncDir, VarDecl};
use crate::query::QueryFile;

fn decl(out: &mut String, indent: &str, v: &VarDecl) {
    let ty = match v.ty {
        Type::Int => "int",
        Type::Real => "real",
        Type::Bool => "bool",
        Type::Clock => "clock",
    };
    match &v.init {
        Some(e) => writeln!(out, "{indent}{ty} {} = {e};", v.name),
        None => writeln!(out, "{indent}{ty} {};", v.name),
    }
    .unwrap();
}

/// Canonical text form of a model; reparses to the same AST (spans aside).
pub fn print_model(m: &Model) -> String {
    let mut out = String::new();
    for v in &m.globals {
        decl(&mut out, "", v);
    }
    for c in &m.channels {
        let kw = match c.kind {
            ChannelKind::Binary => "chan",
            ChannelKind::Broadcast => "broadcast chan",
        };
        writeln!(out, "{kw} {};", c.name).unwrap();
    }
    for d in &m.defines {
        writeln!(out, "define {} = {};", d.name, d.expr).unwrap();
    }
    for t in &m.templates {
        let params: Vec<String> = t.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
        writeln!(out, "\ntemplate {}({}) {{", t.name, params.join(", ")).unwrap();
        for v in &t.locals {
            decl(&mut out, "    ", v);
        }
        for l in &t.locations {
            let mut head = String::from("    ");
            if l.initial {
                head.push_str("init ");
            }
            if l.kind == LocationKind::Committed {
                head.push_str("committed ");
            }
            write!(out, "{head}loc {} {{", l.name).unwrap();
            if let Some(inv) = &l.invariant {
                write!(out, " inv {inv};").unwrap();
            }
            for r in &l.rates {
                write!(out, " rate {} = {};", r.clock, r.expr).unwrap();
            }
            if let Some(x) = l.exit_rate {
                write!(out, " exitrate {};", fmt_real(x)).unwrap();
            }
            writeln!(out, " }}").unwrap();
        }
        for e in &t.edges {
            write!(out, "    {} -> {} {{", e.source, e.target).unwrap();
            if let Some(g) = &e.guard {
                write!(out, " guard {g};").unwrap();
            }
            if let Some(s) = &e.sync {
                let d = if s.dir == SyncDir::Emit { '!' } else { '?' };
                write!(out, " sync {}{d};", s.channel).unwrap();
            }
            if e.weight != 1.0 {
                write!(out, " weight {};", fmt_real(e.weight)).unwrap();
            }
            if !e.updates.is_empty() {
                let ups: Vec<String> = e
                    .updates
                    .iter()
                    .map(|a| format!("{} := {}", a.target, a.expr))
                    .collect();
                write!(out, " update {};", ups.join(", ")).unwrap();
            }
            writeln!(out, " }}").unwrap();
        }
        writeln!(out, "}}").unwrap();
    }
    let insts: Vec<String> = m
        .system
        .iter()
        .map(|i| {
            let args: Vec<String> = i.args.iter().map(|a| a.to_string()).collect();
            match &i.alias {
                Some(a) => format!("{a} = {}({})", i.template, args.join(", ")),
                None => format!("{}({})", i.template, args.join(", ")),
            }
        })
        .collect();
    writeln!(out, "\nsystem {};", insts.join(", ")).unwrap();
    out
}

pub fn print_query_file(f: &QueryFile) -> String {
    let mut out = String::new();
    for c in &f.constraints {
        writeln!(out, "{c}").unwrap();
    }
    for q in &f.queries {
        write!(out, "{}: {}", q.name, q.query).unwrap();
        if let Some(e) = &q.expected {
            write!(out, " => {e}").unwrap();
        }
        writeln!(out).unwrap();
    }
    out
}
