use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::expr::Value;
use crate::network::Network;

use super::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    BoundReached,
    Deadlock,
    /// An observer asked to stop early.
    Stopped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub component: usize,
    pub edge: usize,
    pub channel: Option<usize>,
    /// (component, edge) pairs that received the synchronization.
    pub receivers: Vec<(usize, usize)>,
    /// Watched expressions in the post-state.
    pub watch: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub watch_names: Vec<String>,
    pub initial: State,
    pub initial_watch: Vec<Value>,
    pub events: Vec<TraceEvent>,
    pub end_time: f64,
    pub end_reason: EndReason,
    /// Watched expressions at the end time.
    pub final_watch: Vec<Value>,
}

fn value_json(v: Value) -> serde_json::Value {
    match v {
        Value::Int(i) => json!(i),
        Value::Real(r) => json!(r),
        Value::Bool(b) => json!(b),
    }
}

impl Trace {
    /// Times at which `channel` synchronized.
    pub fn channel_times(&self, channel: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.channel == Some(channel))
            .map(|e| e.time)
            .collect()
    }

    /// One JSON object per event: `{"t", "comp", "edge", "channel", "receivers", "watch"}`.
    pub fn to_jsonl(&self, net: &Network) -> String {
        let mut out = String::new();
        for e in &self.events {
            let comp = &net.components[e.component];
            let mut watch = Map::new();
            for (name, v) in self.watch_names.iter().zip(&e.watch) {
                watch.insert(name.clone(), value_json(*v));
            }
            let receivers: Vec<String> = e
                .receivers
                .iter()
                .map(|(c, ed)| {
                    let rc = &net.components[*c];
                    format!("{}:{}", rc.name, rc.edges[*ed].label)
                })
                .collect();
            let line = json!({
                "t": e.time,
                "comp": comp.name,
                "edge": comp.edges[e.edge].label,
                "channel": e.channel.map(|c| net.channels[c].name.clone()),
                "receivers": receivers,
                "watch": watch,
            });
            writeln!(out, "{line}").unwrap();
        }
        out
    }

    /// CSV with columns `t,<watch...>`: initial state, every event, end state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.watch_names {
            write!(out, ",{}", csv_field(n)).unwrap();
        }
        out.push('\n');
        let mut row = |t: f64, vals: &[Value]| {
            write!(out, "{t}").unwrap();
            for v in vals {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        };
        row(self.initial.time, &self.initial_watch);
        for e in &self.events {
            row(e.time, &e.watch);
        }
        row(self.end_time, &self.final_watch);
        out
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
