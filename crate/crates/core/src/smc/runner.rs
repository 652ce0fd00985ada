use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{chernoff_runs, clopper_pearson, mean_interval, Histogram, Sprt, SprtDecision};
use crate::engine::{EndReason, EngineConfig, EngineError, RngStream, RunObserver, Simulator, State, Trace, TraceEvent};
use crate::expr::{Expr, Value};
use crate::network::{CExpr, Network, ResolveError};
use crate::query::{Expectation, Extremum, NamedQuery, PathFormula, Query, Relation};

/// Runs dispatched per scheduling round.
pub const BATCH: u64 = 64;
/// Bins of the expected-value histogram.
pub const HIST_BINS: usize = 20;
/// Sampling step for `simulate` when neither the query nor the caller gives one.
pub const DEFAULT_SAMPLE_STEP: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub max_runs: u64,
    pub seed: u64,
}

impl Default for StatConfig {
    fn default() -> Self {
        StatConfig {
            alpha: 0.05,
            epsilon: 0.05,
            delta: 0.01,
            max_runs: 1_000_000,
            seed: 42,
        }
    }
}

impl StatConfig {
    pub fn check(&self) -> Result<(), SmcError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SmcError::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(SmcError::Config(format!("epsilon must be in (0, 0.5), got {}", self.epsilon)));
        }
        if !(self.delta > 0.0) {
            return Err(SmcError::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if self.max_runs == 0 {
            return Err(SmcError::Config("max_runs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SmcError {
    #[error("{0}")]
    Config(String),
    #[error("query error: {0}")]
    Resolve(#[from] ResolveError),
    #[error("run {run}: {source}")]
    Engine { run: u64, source: EngineError },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Valid,
    Invalid,
    EstimateOnly,
    Undecided,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
            Verdict::EstimateOnly => "estimate-only",
            Verdict::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmcResult {
    pub name: String,
    pub query: String,
    pub form: String,
    pub verdict: Verdict,
    /// Probability estimate, or the mean for expected-value queries.
    pub p_hat: Option<f64>,
    pub ci: Option<(f64, f64)>,
    /// Second probability of a comparison.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_hat2: Option<f64>,
    pub runs: u64,
    pub wall_ms: u64,
    pub seed: u64,
    pub expected: Option<Expectation>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub histogram: Option<Histogram>,
    /// First run that satisfied an eventually-formula or violated a globally-formula.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_run: Option<u64>,
    /// Per-run values of an expected-value query.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl SmcResult {
    fn new(name: &str, q: &Query, seed: u64) -> SmcResult {
        SmcResult {
            name: name.to_string(),
            query: q.to_string(),
            form: q.form().to_string(),
            verdict: Verdict::EstimateOnly,
            p_hat: None,
            ci: None,
            p_hat2: None,
            runs: 0,
            wall_ms: 0,
            seed,
            expected: None,
            matches: None,
            histogram: None,
            witness_run: None,
            samples: Vec::new(),
        }
    }

    /// Compares the outcome with an expectation. Intervals must contain the
    /// whole confidence interval, except for expected values where the mean is used.
    pub fn judge(&mut self, e: Option<Expectation>) {
        self.expected = e;
        self.matches = e.map(|e| match e {
            Expectation::Valid => self.verdict == Verdict::Valid,
            Expectation::Invalid => self.verdict == Verdict::Invalid,
            Expectation::Within(lo, hi) => {
                if self.form == "expected" {
                    self.p_hat.is_some_and(|m| lo <= m && m <= hi)
                } else {
                    self.ci.is_some_and(|(a, b)| lo <= a && b <= hi)
                }
            }
        });
    }
}

/// Sampled trajectories: one row per grid point or event.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectories {
    pub names: Vec<String>,
    pub rows: Vec<(u64, f64, Vec<Value>)>,
}

impl Trajectories {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,t");
        for n in &self.names {
            out.push(',');
            out.push_str(&crate::engine::csv_field(n));
        }
        out.push('\n');
        for (run, t, vals) in &self.rows {
            out.push_str(&format!("{run},{t}"));
            for v in vals {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

struct PathObs<'a> {
    expr: &'a CExpr,
    eventually: bool,
    bound: f64,
    holds: bool,
}

impl RunObserver for PathObs<'_> {
    fn on_state(&mut self, state: &State, _: Option<&TraceEvent>) -> Result<bool, EngineError> {
        if state.time > self.bound {
            return Ok(false);
        }
        let v = self.expr.eval_bool(&state.env()).map_err(|source| EngineError::Eval {
            context: "path formula".into(),
            source,
        })?;
        if v == self.eventually {
            self.holds = self.eventually;
            return Ok(false);
        }
        Ok(true)
    }
}

struct ExtremumObs<'a> {
    expr: &'a CExpr,
    mode: Extremum,
    best: f64,
}

impl ExtremumObs<'_> {
    fn record(&mut self, state: &State) -> Result<(), EngineError> {
        let v = self.expr.eval_f64(&state.env()).map_err(|source| EngineError::Eval {
            context: "expected value".into(),
            source,
        })?;
        self.best = match self.mode {
            Extremum::Max => self.best.max(v),
            Extremum::Min => self.best.min(v),
        };
        Ok(())
    }
}

impl RunObserver for ExtremumObs<'_> {
    fn on_state(&mut self, state: &State, _: Option<&TraceEvent>) -> Result<bool, EngineError> {
        self.record(state)?;
        Ok(true)
    }

    fn on_end(&mut self, state: &State, _: EndReason) -> Result<(), EngineError> {
        self.record(state)
    }
}

struct SampleObs<'a> {
    exprs: &'a [CExpr],
    step: f64,
    rows: Vec<(f64, Vec<Value>)>,
}

impl SampleObs<'_> {
    fn record(&mut self, state: &State) -> Result<(), EngineError> {
        let vals = self
            .exprs
            .iter()
            .map(|e| e.eval(&state.env()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| EngineError::Eval {
                context: "simulate expression".into(),
                source,
            })?;
        self.rows.push((state.time, vals));
        Ok(())
    }
}

impl RunObserver for SampleObs<'_> {
    fn on_state(&mut self, state: &State, event: Option<&TraceEvent>) -> Result<bool, EngineError> {
        if event.is_some() {
            self.record(state)?;
        }
        Ok(true)
    }

    fn sample_step(&self) -> Option<f64> {
        Some(self.step)
    }

    fn on_sample(&mut self, state: &State) -> Result<(), EngineError> {
        self.record(state)
    }
}

/// True iff the formula holds on the recorded trace; the formula's state
/// expression must be one of the trace's watched expressions.
pub fn evaluate_path_formula(trace: &Trace, f: &PathFormula, bound: f64) -> Result<bool, SmcError> {
    let key = f.state_expr().to_string();
    let idx = trace
        .watch_names
        .iter()
        .position(|n| *n == key)
        .ok_or_else(|| SmcError::Resolve(ResolveError(format!("`{key}` is not watched by the trace"))))?;
    let eventually = matches!(f, PathFormula::Eventually(_));
    let states = std::iter::once((trace.initial.time, &trace.initial_watch[idx]))
        .chain(trace.events.iter().map(|e| (e.time, &e.watch[idx])));
    for (t, v) in states {
        if t > bound {
            break;
        }
        if v.as_bool() == Some(eventually) {
            return Ok(eventually);
        }
    }
    Ok(!eventually)
}

/// Executes queries on one network with a fixed worker pool.
pub struct Checker<'n> {
    pub net: &'n Network,
    pub engine: EngineConfig,
    pub stats: StatConfig,
    pool: rayon::ThreadPool,
}

impl<'n> Checker<'n> {
    pub fn new(net: &'n Network, engine: EngineConfig, stats: StatConfig, workers: usize) -> Result<Self, SmcError> {
        stats.check()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| SmcError::Pool(e.to_string()))?;
        Ok(Checker {
            net,
            engine,
            stats,
            pool,
        })
    }

    fn sim(&self) -> Simulator<'n> {
        Simulator::new(self.net, self.engine)
    }

    fn rng(&self, run: u64) -> RngStream {
        RngStream::new(self.stats.seed, run)
    }

    /// Evaluates `f` for runs `start..start+len` in parallel; results in run order.
    fn batch<T: Send>(
        &self,
        start: u64,
        len: u64,
        f: impl Fn(u64) -> Result<T, EngineError> + Sync,
    ) -> Result<Vec<T>, SmcError> {
        let out: Vec<Result<T, EngineError>> =
            self.pool.install(|| (start..start + len).into_par_iter().map(&f).collect());
        out.into_iter()
            .zip(start..)
            .map(|(r, run)| r.map_err(|source| SmcError::Engine { run, source }))
            .collect()
    }

    fn path_outcome(&self, expr: &CExpr, eventually: bool, bound: f64, run: u64) -> Result<bool, EngineError> {
        let mut obs = PathObs {
            expr,
            eventually,
            bound,
            holds: !eventually,
        };
        self.sim().run_observed(bound, &mut self.rng(run), &mut obs)?;
        Ok(obs.holds)
    }

    fn compile_path(&self, f: &PathFormula) -> Result<(CExpr, bool), SmcError> {
        Ok((
            self.net.compile_predicate(f.state_expr())?,
            matches!(f, PathFormula::Eventually(_)),
        ))
    }

    /// Outcome of `f` on run `run`.
    pub fn estimate_one(&self, f: &PathFormula, bound: f64, run: u64) -> Result<bool, SmcError> {
        let (expr, eventually) = self.compile_path(f)?;
        self.path_outcome(&expr, eventually, bound, run)
            .map_err(|source| SmcError::Engine { run, source })
    }

    /// Records one run in full.
    pub fn trace(&self, bound: f64, run: u64, watch: &[Expr]) -> Result<Trace, SmcError> {
        let compiled = watch
            .iter()
            .map(|e| Ok((e.to_string(), self.net.compile_expr(e)?.0)))
            .collect::<Result<Vec<_>, SmcError>>()?;
        self.sim()
            .run(bound, &mut self.rng(run), &compiled)
            .map_err(|source| SmcError::Engine { run, source })
    }

    pub fn estimate(&self, f: &PathFormula, bound: f64) -> Result<SmcResult, SmcError> {
        let t0 = Instant::now();
        let q = Query::Estimate {
            formula: f.clone(),
            bound,
        };
        let mut res = SmcResult::new("", &q, self.stats.seed);
        let (expr, eventually) = self.compile_path(f)?;
        let needed = chernoff_runs(self.stats.alpha, self.stats.epsilon);
        let n = needed.min(self.stats.max_runs);
        let outcomes = self.batch(0, n, |r| self.path_outcome(&expr, eventually, bound, r))?;
        let k = outcomes.iter().filter(|b| **b).count() as u64;
        res.witness_run = outcomes.iter().position(|b| *b == eventually).map(|i| i as u64);
        res.p_hat = Some(k as f64 / n as f64);
        res.ci = Some(clopper_pearson(k, n, self.stats.alpha));
        res.runs = n;
        res.verdict = if n < needed {
            Verdict::Undecided
        } else {
            Verdict::EstimateOnly
        };
        res.wall_ms = t0.elapsed().as_millis() as u64;
        Ok(res)
    }

    pub fn hypothesis(&self, f: &PathFormula, bound: f64, p0: f64, rel: Relation) -> Result<SmcResult, SmcError> {
        let t0 = Instant::now();
        let q = Query::Hypothesis {
            formula: f.clone(),
            bound,
            p0,
            relation: rel,
        };
        let mut res = SmcResult::new("", &q, self.stats.seed);
        let (expr, eventually) = self.compile_path(f)?;
        // Pr(f) <= p0 is tested as Pr(!f) >= 1 - p0
        let (target, flip) = match rel {
            Relation::Ge => (p0, false),
            Relation::Le => (1.0 - p0, true),
        };
        let mut sprt = Sprt::new(target, self.stats.delta, self.stats.alpha, self.stats.alpha);
        let mut k = 0u64;
        let mut n = 0u64;
        let mut decision = SprtDecision::Continue;
        'outer: while n < self.stats.max_runs {
            let len = BATCH.min(self.stats.max_runs - n);
            let outcomes = self.batch(n, len, |r| self.path_outcome(&expr, eventually, bound, r))?;
            for b in outcomes {
                if b == eventually && res.witness_run.is_none() {
                    res.witness_run = Some(n);
                }
                n += 1;
                k += b as u64;
                decision = sprt.observe(b != flip);
                if decision != SprtDecision::Continue {
                    break 'outer;
                }
            }
        }
        res.verdict = match decision {
            SprtDecision::AcceptH0 => Verdict::Valid,
            SprtDecision::AcceptH1 => Verdict::Invalid,
            SprtDecision::Continue => Verdict::Undecided,
        };
        res.runs = n;
        res.p_hat = Some(k as f64 / n as f64);
        res.ci = Some(clopper_pearson(k, n, self.stats.alpha));
        res.wall_ms = t0.elapsed().as_millis() as u64;
        Ok(res)
    }

    /// Paired test of `Pr(f1) >= Pr(f2)`: pair `i` uses run `2i` for `f1` and `2i+1` for `f2`.
    pub fn compare(&self, f1: &PathFormula, b1: f64, f2: &PathFormula, b2: f64) -> Result<SmcResult, SmcError> {
        let t0 = Instant::now();
        let q = Query::Compare {
            formula1: f1.clone(),
            bound1: b1,
            formula2: f2.clone(),
            bound2: b2,
        };
        let mut res = SmcResult::new("", &q, self.stats.seed);
        let (e1, ev1) = self.compile_path(f1)?;
        let (e2, ev2) = self.compile_path(f2)?;
        let delta = self.stats.delta;
        let alpha = self.stats.alpha;
        // among discordant pairs: H0 P(1,0) = 1/2 against H1 P(1,0) = 1/2 - 2 delta
        let mut sprt = Sprt::new(0.5 - delta, delta, alpha, alpha);
        let (mut pairs, mut k1, mut k2, mut n01) = (0u64, 0u64, 0u64, 0u64);
        let max_pairs = (self.stats.max_runs / 2).max(1);
        let mut verdict = Verdict::Undecided;
        'outer: while pairs < max_pairs {
            let len = BATCH.min(max_pairs - pairs);
            let outcomes = self.batch(pairs, len, |i| {
                Ok((
                    self.path_outcome(&e1, ev1, b1, 2 * i)?,
                    self.path_outcome(&e2, ev2, b2, 2 * i + 1)?,
                ))
            })?;
            for (a, b) in outcomes {
                pairs += 1;
                k1 += a as u64;
                k2 += b as u64;
                if a != b {
                    n01 += b as u64;
                    match sprt.observe(a) {
                        SprtDecision::AcceptH0 => verdict = Verdict::Valid,
                        SprtDecision::AcceptH1 => verdict = Verdict::Invalid,
                        SprtDecision::Continue => continue,
                    }
                    break 'outer;
                }
            }
            // f2 beats f1 so rarely that the difference is inside the indifference region
            if clopper_pearson(n01, pairs, alpha).1 < delta {
                verdict = Verdict::Valid;
                break;
            }
        }
        res.verdict = verdict;
        res.runs = 2 * pairs;
        res.p_hat = Some(k1 as f64 / pairs as f64);
        res.ci = Some(clopper_pearson(k1, pairs, alpha));
        res.p_hat2 = Some(k2 as f64 / pairs as f64);
        res.wall_ms = t0.elapsed().as_millis() as u64;
        Ok(res)
    }

    pub fn expected(&self, expr: &Expr, bound: f64, runs: u64, mode: Extremum) -> Result<SmcResult, SmcError> {
        let t0 = Instant::now();
        let q = Query::Expected {
            bound,
            runs,
            mode,
            expr: expr.clone(),
        };
        let mut res = SmcResult::new("", &q, self.stats.seed);
        let c = self.net.compile_numeric(expr)?;
        let values = self.batch(0, runs, |r| {
            let mut obs = ExtremumObs {
                expr: &c,
                mode,
                best: match mode {
                    Extremum::Max => f64::NEG_INFINITY,
                    Extremum::Min => f64::INFINITY,
                },
            };
            self.sim().run_observed(bound, &mut self.rng(r), &mut obs)?;
            Ok(obs.best)
        })?;
        let (mean, ci) = mean_interval(&values, self.stats.alpha);
        res.p_hat = Some(mean);
        res.ci = Some(ci);
        res.runs = runs;
        res.histogram = Some(Histogram::build(&values, HIST_BINS));
        res.samples = values;
        res.wall_ms = t0.elapsed().as_millis() as u64;
        Ok(res)
    }

    pub fn simulate(&self, runs: u64, bound: f64, exprs: &[Expr], step: f64) -> Result<Trajectories, SmcError> {
        if !(step > 0.0) {
            return Err(SmcError::Config(format!("sample step must be positive, got {step}")));
        }
        let compiled = exprs
            .iter()
            .map(|e| Ok(self.net.compile_expr(e)?.0))
            .collect::<Result<Vec<_>, SmcError>>()?;
        let per_run = self.batch(0, runs, |r| {
            let mut obs = SampleObs {
                exprs: &compiled,
                step,
                rows: Vec::new(),
            };
            self.sim().run_observed(bound, &mut self.rng(r), &mut obs)?;
            Ok(obs.rows)
        })?;
        let rows = per_run
            .into_iter()
            .zip(0u64..)
            .flat_map(|(rows, r)| rows.into_iter().map(move |(t, v)| (r, t, v)))
            .collect();
        Ok(Trajectories {
            names: exprs.iter().map(|e| e.to_string()).collect(),
            rows,
        })
    }

    /// Runs any query. `simulate` yields a summary result plus its trajectories.
    pub fn run_query(
        &self,
        nq: &NamedQuery,
        sample_step: Option<f64>,
    ) -> Result<(SmcResult, Option<Trajectories>), SmcError> {
        let t0 = Instant::now();
        let (mut res, traj) = match &nq.query {
            Query::Estimate { formula, bound } => (self.estimate(formula, *bound)?, None),
            Query::Hypothesis {
                formula,
                bound,
                p0,
                relation,
            } => (self.hypothesis(formula, *bound, *p0, *relation)?, None),
            Query::Compare {
                formula1,
                bound1,
                formula2,
                bound2,
            } => (self.compare(formula1, *bound1, formula2, *bound2)?, None),
            Query::Expected {
                bound,
                runs,
                mode,
                expr,
            } => (self.expected(expr, *bound, *runs, *mode)?, None),
            Query::Simulate {
                runs,
                bound,
                exprs,
                sample_step: qs,
            } => {
                let step = qs.or(sample_step).unwrap_or(DEFAULT_SAMPLE_STEP);
                let t = self.simulate(*runs, *bound, exprs, step)?;
                let mut r = SmcResult::new("", &nq.query, self.stats.seed);
                r.runs = *runs;
                (r, Some(t))
            }
        };
        res.name = nq.name.clone();
        res.query = nq.query.to_string();
        res.judge(nq.expected);
        res.wall_ms = t0.elapsed().as_millis() as u64;
        Ok((res, traj))
    }
}
