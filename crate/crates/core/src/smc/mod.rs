//! The five statistical query forms on top of engine runs.
//!
//! Every run `i` of a query draws from the stream `(seed, i)`, and runs are
//! aggregated in index order, so results do not depend on the worker count.

mod runner;
pub mod stats;

pub use runner::{
    evaluate_path_formula, Checker, SmcError, SmcResult, StatConfig, Trajectories, Verdict, BATCH,
    DEFAULT_SAMPLE_STEP, HIST_BINS,
};
pub use stats::{chernoff_runs, clopper_pearson, Histogram, Sprt, SprtDecision};

#[cfg(test)]
mod tests;
