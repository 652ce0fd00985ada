//! Weakly-hard timing constraints: observer automata, a trace oracle and
//! the m-out-of-k window judgment.

mod constraint;
mod observer;
mod oracle;

pub use constraint::{ConstraintError, ConstraintKind, EventBinding, PeriodBand, WhConstraint};
pub use observer::{build_observer, compose, observer_source, ObserverError};
pub use oracle::{
    check_trace, measure_end_to_end, measure_execution, measure_periodic, measure_synchronization,
    occurrence_times, wh_judge, ExecEvent, MonitorVerdict, OccurrenceRecord, OracleError, ShortWindow,
};

#[cfg(test)]
mod tests;
