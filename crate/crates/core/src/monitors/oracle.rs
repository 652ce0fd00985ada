//! Direct measurement of timing constraints on recorded traces.

use serde::{Deserialize, Serialize};

use super::constraint::{ConstraintKind, EventBinding, PeriodBand, WhConstraint};
use crate::engine::Trace;
use crate::expr::{compare_f64, BinOp};
use crate::network::Network;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceRecord {
    pub index: usize,
    /// Duration, spread, gap or latency in time units.
    pub quantity: f64,
    pub pass: bool,
    /// Trailing occurrence the trace ended before completing; not judged.
    #[serde(default)]
    pub incomplete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub constraint: String,
    pub records: Vec<OccurrenceRecord>,
    pub wh_holds: bool,
    pub first_violation: Option<usize>,
}

impl MonitorVerdict {
    pub fn any_fail(&self) -> bool {
        self.records.iter().any(|r| !r.incomplete && !r.pass)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("malformed trace at t={time}: {message}")]
    Malformed { time: f64, message: String },
    #[error("constraint {constraint}: {message}")]
    Binding { constraint: String, message: String },
}

fn malformed(time: f64, message: &str) -> OracleError {
    OracleError::Malformed {
        time,
        message: message.into(),
    }
}

/// What to do when fewer than k occurrences were judged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortWindow {
    /// Require ceil(m * len / k) passes among the `len` available records.
    #[default]
    Proportional,
    /// Short traces satisfy the constraint.
    Vacuous,
}

fn within(q: f64, lo: f64, hi: f64) -> bool {
    compare_f64(BinOp::Ge, q, lo) && compare_f64(BinOp::Le, q, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecEvent {
    Start,
    Stop,
    Preempt,
    Resume,
}

pub fn measure_execution(events: &[(f64, ExecEvent)], lower: f64, upper: f64) -> Result<Vec<OccurrenceRecord>, OracleError> {
    enum St {
        Idle,
        Running { start: f64, held: f64 },
        Preempted { start: f64, held: f64, since: f64 },
    }
    let mut st = St::Idle;
    let mut out = Vec::new();
    for &(t, e) in events {
        st = match (st, e) {
            (St::Idle, ExecEvent::Start) => St::Running { start: t, held: 0.0 },
            (St::Running { start, held }, ExecEvent::Stop) => {
                let q = t - start - held;
                out.push(OccurrenceRecord {
                    index: out.len(),
                    quantity: q,
                    pass: within(q, lower, upper),
                    incomplete: false,
                });
                St::Idle
            }
            (St::Running { start, held }, ExecEvent::Preempt) => St::Preempted { start, held, since: t },
            (St::Preempted { start, held, since }, ExecEvent::Resume) => St::Running {
                start,
                held: held + (t - since),
            },
            (St::Idle, ExecEvent::Stop) => return Err(malformed(t, "stop without start")),
            (_, ExecEvent::Resume) => return Err(malformed(t, "resume without preempt")),
            (St::Idle, ExecEvent::Preempt) => return Err(malformed(t, "preempt outside an execution")),
            (_, ExecEvent::Start) => return Err(malformed(t, "start during an execution")),
            (St::Preempted { .. }, _) => return Err(malformed(t, "event while preempted")),
        };
    }
    if let St::Running { .. } | St::Preempted { .. } = st {
        out.push(OccurrenceRecord {
            index: out.len(),
            quantity: f64::NAN,
            pass: false,
            incomplete: true,
        });
    }
    Ok(out)
}

/// Groups the i-th arrival of every stream; incomplete trailing groups are flagged.
pub fn measure_synchronization(streams: &[Vec<f64>], tolerance: f64) -> Vec<OccurrenceRecord> {
    let longest = streams.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let group: Vec<f64> = streams.iter().filter_map(|s| s.get(i).copied()).collect();
            let hi = group.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = group.iter().copied().fold(f64::INFINITY, f64::min);
            let complete = group.len() == streams.len();
            OccurrenceRecord {
                index: i,
                quantity: hi - lo,
                pass: complete && compare_f64(BinOp::Le, hi - lo, tolerance),
                incomplete: !complete,
            }
        })
        .collect()
}

impl PeriodBand {
    /// Accepted gap interval.
    pub fn band(self, lower: f64, upper: f64, jitter: f64) -> (f64, f64) {
        match self {
            PeriodBand::Fixed => {
                let t = (lower + upper) / 2.0;
                (t - jitter, t + jitter)
            }
            PeriodBand::PerOccurrence => (lower - jitter, upper + jitter),
        }
    }
}

pub fn measure_periodic(times: &[f64], band: (f64, f64)) -> Vec<OccurrenceRecord> {
    times
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let q = w[1] - w[0];
            OccurrenceRecord {
                index: i,
                quantity: q,
                pass: within(q, band.0, band.1),
                incomplete: false,
            }
        })
        .collect()
}

pub fn measure_end_to_end(source: &[f64], target: &[f64], lower: f64, upper: f64) -> Result<Vec<OccurrenceRecord>, OracleError> {
    if target.len() > source.len() {
        return Err(malformed(target[source.len()], "target without a source"));
    }
    source
        .iter()
        .enumerate()
        .map(|(i, &s)| match target.get(i) {
            Some(&t) if t < s => Err(malformed(t, "target precedes its source")),
            Some(&t) => Ok(OccurrenceRecord {
                index: i,
                quantity: t - s,
                pass: within(t - s, lower, upper),
                incomplete: false,
            }),
            None => Ok(OccurrenceRecord {
                index: i,
                quantity: f64::NAN,
                pass: false,
                incomplete: true,
            }),
        })
        .collect()
}

/// True iff every k consecutive complete records contain at least m passes.
/// Returns the index of the first violating window.
pub fn wh_judge(records: &[OccurrenceRecord], m: u32, k: u32, short: ShortWindow) -> (bool, Option<usize>) {
    let passes: Vec<u32> = records
        .iter()
        .filter(|r| !r.incomplete)
        .map(|r| r.pass as u32)
        .collect();
    let k = k as usize;
    if passes.len() < k {
        if short == ShortWindow::Vacuous || passes.is_empty() {
            return (true, None);
        }
        let need = (m as usize * passes.len()).div_ceil(k);
        let ok = passes.iter().sum::<u32>() as usize >= need;
        return (ok, (!ok).then_some(0));
    }
    let mut sum: u32 = passes[..k].iter().sum();
    for i in 0..=passes.len() - k {
        if i > 0 {
            sum = sum + passes[i + k - 1] - passes[i - 1];
        }
        if sum < m {
            return (false, Some(i));
        }
    }
    (true, None)
}

/// Times at which `binding` occurs on the trace. Predicates must be watched
/// by the trace and occur on rising edges.
pub fn occurrence_times(trace: &Trace, net: &Network, binding: &EventBinding) -> Result<Vec<f64>, String> {
    Ok(occurrence_marks(trace, net, binding)?
        .into_iter()
        .map(|i| event_time(trace, i))
        .collect())
}

fn event_time(trace: &Trace, i: usize) -> f64 {
    trace.events[i].time
}

/// Indices of the events at which `binding` occurs.
fn occurrence_marks(trace: &Trace, net: &Network, binding: &EventBinding) -> Result<Vec<usize>, String> {
    match binding {
        EventBinding::Channel(c) => {
            let ch = net.channel(c).ok_or_else(|| format!("unknown channel `{c}`"))?;
            Ok(trace
                .events
                .iter()
                .enumerate()
                .filter(|(_, e)| e.channel == Some(ch))
                .map(|(i, _)| i)
                .collect())
        }
        EventBinding::Predicate(p) => {
            let key = p.to_string();
            let w = trace
                .watch_names
                .iter()
                .position(|n| *n == key)
                .ok_or_else(|| format!("predicate `{key}` is not watched by the trace"))?;
            let mut prev = trace.initial_watch[w].as_bool().unwrap_or(false);
            let mut out = Vec::new();
            for (i, e) in trace.events.iter().enumerate() {
                let now = e.watch[w].as_bool().unwrap_or(false);
                if now && !prev {
                    out.push(i);
                }
                prev = now;
            }
            Ok(out)
        }
    }
}

/// Measures `c` on a trace and applies the m-out-of-k judgment.
pub fn check_trace(trace: &Trace, net: &Network, c: &WhConstraint, short: ShortWindow) -> Result<MonitorVerdict, OracleError> {
    let bind_err = |message: String| OracleError::Binding {
        constraint: c.name.clone(),
        message,
    };
    let times = |role: &str| -> Result<Vec<f64>, OracleError> {
        match c.binding(role) {
            Some(b) => occurrence_times(trace, net, b).map_err(bind_err),
            None => Ok(Vec::new()),
        }
    };
    let records = match &c.kind {
        ConstraintKind::Execution { lower, upper } => {
            let mut marks: Vec<(usize, usize, ExecEvent)> = Vec::new();
            for (order, (role, ev)) in [
                ("start", ExecEvent::Start),
                ("preempt", ExecEvent::Preempt),
                ("resume", ExecEvent::Resume),
                ("stop", ExecEvent::Stop),
            ]
            .into_iter()
            .enumerate()
            {
                if let Some(b) = c.binding(role) {
                    for i in occurrence_marks(trace, net, b).map_err(bind_err)? {
                        marks.push((i, order, ev));
                    }
                }
            }
            marks.sort_by_key(|(i, order, _)| (*i, *order));
            let events: Vec<(f64, ExecEvent)> = marks.iter().map(|(i, _, e)| (event_time(trace, *i), *e)).collect();
            measure_execution(&events, *lower, *upper)?
        }
        ConstraintKind::Synchronization { tolerance } => {
            let streams = c
                .sync_streams()
                .into_iter()
                .map(|b| occurrence_times(trace, net, b).map_err(bind_err))
                .collect::<Result<Vec<_>, _>>()?;
            measure_synchronization(&streams, *tolerance)
        }
        ConstraintKind::Periodic {
            lower,
            upper,
            jitter,
            band,
        } => measure_periodic(&times("occurrence")?, band.band(*lower, *upper, *jitter)),
        ConstraintKind::EndToEnd { lower, upper } => {
            measure_end_to_end(&times("source")?, &times("target")?, *lower, *upper)?
        }
    };
    let (wh_holds, first_violation) = wh_judge(&records, c.m, c.k, short);
    Ok(MonitorVerdict {
        constraint: c.name.clone(),
        records,
        wh_holds,
        first_violation,
    })
}
