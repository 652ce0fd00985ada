//! Declarative model of a network of stochastic timed automata.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Type};

/// Position in the source text (1-based).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub ty: Type,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Binary,
    Broadcast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDecl {
    pub name: String,
    pub kind: ChannelKind,
    pub span: Span,
}

/// Named expression macro, expanded wherever the name is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Define {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Normal,
    Committed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDecl {
    pub clock: String,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    pub initial: bool,
    pub kind: LocationKind,
    pub invariant: Option<Expr>,
    pub rates: Vec<RateDecl>,
    pub exit_rate: Option<f64>,
    pub span: Span,
}

impl Location {
    pub fn new(name: &str) -> Self {
        Location {
            name: name.to_string(),
            initial: false,
            kind: LocationKind::Normal,
            invariant: None,
            rates: Vec::new(),
            exit_rate: None,
            span: Span::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyncDir {
    Emit,
    Receive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncLabel {
    pub channel: String,
    pub dir: SyncDir,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assign {
    pub target: String,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub guard: Option<Expr>,
    pub sync: Option<SyncLabel>,
    pub weight: f64,
    pub updates: Vec<Assign>,
    pub span: Span,
}

impl Edge {
    pub fn new(source: &str, target: &str) -> Self {
        Edge {
            source: source.to_string(),
            target: target.to_string(),
            guard: None,
            sync: None,
            weight: 1.0,
            updates: Vec::new(),
            span: Span::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub name: String,
    pub params: Vec<Param>,
    pub locals: Vec<VarDecl>,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub span: Span,
}

impl Template {
    pub fn location(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn initial(&self) -> Option<usize> {
        self.locations.iter().position(|l| l.initial)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instantiation {
    /// Explicit component name (`name = Template(args)`).
    pub alias: Option<String>,
    pub template: String,
    pub args: Vec<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub globals: Vec<VarDecl>,
    pub channels: Vec<ChannelDecl>,
    pub defines: Vec<Define>,
    pub templates: Vec<Template>,
    pub system: Vec<Instantiation>,
}

impl Model {
    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }

    /// Component names in system order.
    pub fn component_names(&self) -> Vec<String> {
        self.system
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                if let Some(a) = &inst.alias {
                    return a.clone();
                }
                let count = self
                    .system
                    .iter()
                    .filter(|o| o.alias.is_none() && o.template == inst.template)
                    .count();
                if count == 1 {
                    inst.template.clone()
                } else {
                    format!("{}_{}", inst.template, i)
                }
            })
            .collect()
    }
}
