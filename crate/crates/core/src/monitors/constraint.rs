use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;

/// How a periodic constraint picks its nominal period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodBand {
    /// One period for the whole stream: the band is centred on (lower + upper) / 2.
    Fixed,
    /// Any period in [lower, upper] per gap: band [lower - jitter, upper + jitter].
    PerOccurrence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    Execution { lower: f64, upper: f64 },
    Synchronization { tolerance: f64 },
    Periodic { lower: f64, upper: f64, jitter: f64, band: PeriodBand },
    EndToEnd { lower: f64, upper: f64 },
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::Execution { .. } => "execution",
            ConstraintKind::Synchronization { .. } => "synchronization",
            ConstraintKind::Periodic { .. } => "periodic",
            ConstraintKind::EndToEnd { .. } => "end_to_end",
        }
    }

    /// Abstract event names this kind accepts (synchronization takes e1..en).
    pub fn roles(&self) -> &'static [&'static str] {
        match self {
            ConstraintKind::Execution { .. } => &["start", "stop", "preempt", "resume"],
            ConstraintKind::Synchronization { .. } => &[],
            ConstraintKind::Periodic { .. } => &["occurrence"],
            ConstraintKind::EndToEnd { .. } => &["source", "target"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventBinding {
    /// Every synchronization on the channel is an occurrence.
    Channel(String),
    /// Every rising edge of the predicate is an occurrence (oracle only).
    Predicate(Expr),
}

impl fmt::Display for EventBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventBinding::Channel(c) => write!(f, "{c}"),
            EventBinding::Predicate(e) => write!(f, "when({e})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhConstraint {
    pub name: String,
    pub kind: ConstraintKind,
    pub m: u32,
    pub k: u32,
    pub bindings: Vec<(String, EventBinding)>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConstraintError {
    #[error("constraint {0}: {1}")]
    Invalid(String, String),
}

impl WhConstraint {
    pub fn binding(&self, role: &str) -> Option<&EventBinding> {
        self.bindings.iter().find(|(r, _)| r == role).map(|(_, b)| b)
    }

    /// Synchronization streams e1, e2, ... in index order.
    pub fn sync_streams(&self) -> Vec<&EventBinding> {
        let mut v: Vec<(u32, &EventBinding)> = self
            .bindings
            .iter()
            .filter_map(|(r, b)| r.strip_prefix('e')?.parse().ok().map(|i| (i, b)))
            .collect();
        v.sort_by_key(|(i, _)| *i);
        v.into_iter().map(|(_, b)| b).collect()
    }

    pub fn check(&self) -> Result<(), ConstraintError> {
        let bad = |msg: String| Err(ConstraintError::Invalid(self.name.clone(), msg));
        if self.m < 1 || self.m > self.k {
            return bad(format!("need 1 <= m <= k, got m={} k={}", self.m, self.k));
        }
        let finite = |v: f64| v.is_finite() && v >= 0.0;
        match &self.kind {
            ConstraintKind::Execution { lower, upper }
            | ConstraintKind::EndToEnd { lower, upper } => {
                if !finite(*lower) || !finite(*upper) || lower > upper {
                    return bad(format!("need 0 <= lower <= upper, got [{lower}, {upper}]"));
                }
            }
            ConstraintKind::Periodic { lower, upper, jitter, .. } => {
                if !finite(*lower) || !finite(*upper) || lower > upper || *lower <= 0.0 {
                    return bad(format!("need 0 < lower <= upper, got [{lower}, {upper}]"));
                }
                if !finite(*jitter) {
                    return bad(format!("jitter must be >= 0, got {jitter}"));
                }
            }
            ConstraintKind::Synchronization { tolerance } => {
                if !finite(*tolerance) {
                    return bad(format!("tolerance must be >= 0, got {tolerance}"));
                }
            }
        }
        let roles = self.kind.roles();
        for (role, _) in &self.bindings {
            let ok = match self.kind {
                ConstraintKind::Synchronization { .. } => role
                    .strip_prefix('e')
                    .and_then(|i| i.parse::<u32>().ok())
                    .is_some_and(|i| i >= 1),
                _ => roles.contains(&role.as_str()),
            };
            if !ok {
                return bad(format!("unknown event `{role}` for a {} constraint", self.kind.name()));
            }
            if self.bindings.iter().filter(|(r, _)| r == role).count() > 1 {
                return bad(format!("event `{role}` bound twice"));
            }
        }
        let required: &[&str] = match self.kind {
            ConstraintKind::Execution { .. } => &["start", "stop"],
            ConstraintKind::Periodic { .. } => &["occurrence"],
            ConstraintKind::EndToEnd { .. } => &["source", "target"],
            ConstraintKind::Synchronization { .. } => &[],
        };
        for r in required {
            if self.binding(r).is_none() {
                return bad(format!("event `{r}` is not bound"));
            }
        }
        if matches!(self.kind, ConstraintKind::Execution { .. })
            && self.binding("preempt").is_some() != self.binding("resume").is_some()
        {
            return bad("preempt and resume must be bound together".into());
        }
        if let ConstraintKind::Synchronization { .. } = self.kind {
            let n = self.sync_streams().len();
            if n < 2 {
                return bad(format!("synchronization needs at least 2 streams, got {n}"));
            }
            for i in 1..=n {
                if self.binding(&format!("e{i}")).is_none() {
                    return bad(format!("streams must be numbered e1..e{n}"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for WhConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "constraint {} {}(", self.name, self.kind.name())?;
        match &self.kind {
            ConstraintKind::Execution { lower, upper } | ConstraintKind::EndToEnd { lower, upper } => {
                write!(f, "lower={lower}, upper={upper}")?
            }
            ConstraintKind::Synchronization { tolerance } => write!(f, "tolerance={tolerance}")?,
            ConstraintKind::Periodic { lower, upper, jitter, band } => {
                write!(f, "lower={lower}, upper={upper}, jitter={jitter}")?;
                if *band == PeriodBand::PerOccurrence {
                    write!(f, ", per_occurrence=1")?;
                }
            }
        }
        write!(f, ", m={}, k={}) on ", self.m, self.k)?;
        for (i, (role, b)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{role}={b}")?;
        }
        write!(f, ";")
    }
}
