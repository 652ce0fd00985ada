//! Stochastic semantics: delay sampling, races, weighted choice,
//! synchronization and clock integration under location-dependent rates.

mod rate;
mod rng;
mod trace;

use crate::expr::{compare_f64, BinOp, EvalError, Value};
use crate::model::{ChannelKind, SyncDir};
use crate::network::{CExpr, Constraint, Env, Network, Rate, Slot};

pub use rng::RngStream;
pub use trace::{csv_field, EndReason, Trace, TraceEvent};

/// Slack for comparing instants.
const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub time: f64,
    pub locs: Vec<usize>,
    pub vars: Vec<Value>,
    pub clocks: Vec<f64>,
}

impl State {
    pub fn env(&self) -> Env<'_> {
        Env {
            locs: &self.locs,
            vars: &self.vars,
            clocks: &self.clocks,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineConfig {
    /// Largest RK4 step, in time units.
    pub h_max: f64,
    /// Steps per run before the run is declared zeno.
    pub max_steps: u64,
    /// Re-check every location invariant after each step.
    pub check_invariants: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            h_max: 0.05,
            max_steps: 1_000_000,
            check_invariants: cfg!(debug_assertions),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invariant of {component}.{location} does not hold at t={time}")]
    InvariantViolated {
        component: String,
        location: String,
        time: f64,
    },
    #[error("rate of clock {clock} is not finite at t={time}")]
    NonFiniteRate { clock: String, time: f64 },
    #[error("zeno/committed-loop: run made {0} steps without reaching the bound")]
    Zeno(u64),
    #[error("evaluation error in {context}: {source}")]
    Eval { context: String, source: EvalError },
    #[error("time bound must be positive and finite, got {0}")]
    BadBound(f64),
    #[error("{0}")]
    Observer(String),
}

fn eval_err(context: impl Into<String>) -> impl FnOnce(EvalError) -> EngineError {
    let context = context.into();
    move |source| EngineError::Eval { context, source }
}

/// Hooks called while a run executes.
pub trait RunObserver {
    /// Called with the initial state (`event == None`) and after every event.
    /// Returning `false` stops the run.
    fn on_state(&mut self, state: &State, event: Option<&TraceEvent>) -> Result<bool, EngineError>;

    /// Called once with the final state.
    fn on_end(&mut self, _state: &State, _reason: EndReason) -> Result<(), EngineError> {
        Ok(())
    }

    /// Grid spacing for [`RunObserver::on_sample`], if wanted.
    fn sample_step(&self) -> Option<f64> {
        None
    }

    /// Called at t = 0, step, 2*step, ... up to the end of the run, with the
    /// state just before any event at that instant.
    fn on_sample(&mut self, _state: &State) -> Result<(), EngineError> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub end_time: f64,
    pub end_reason: EndReason,
    pub steps: u64,
    pub events: u64,
}

/// Result of a single [`Simulator::step`].
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Event(TraceEvent),
    /// Time advanced but the winning component had nothing enabled.
    Silent,
    End(EndReason),
}

enum Plan {
    /// Fire `comp` after `delay`; `at_limit` if the delay hits its invariant bound.
    Fire { comp: usize, delay: f64, at_limit: bool },
    /// Nothing will ever happen.
    Idle,
    /// An invariant runs out before anyone can act.
    Timelock { delay: f64 },
    /// A committed location has no enabled edge.
    Stuck,
}

/// Interval of delays `[lo, hi]`.
type Window = (f64, f64);

fn intersect(a: Window, b: Window) -> Option<Window> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if lo <= hi + TIME_EPS {
        Some((lo, hi.max(lo)))
    } else {
        None
    }
}

/// Delays `d >= 0` for which `v + r*d op b` holds.
fn atom_window(v: f64, r: f64, op: BinOp, b: f64) -> Option<Window> {
    let holds_now = compare_f64(op, v, b);
    if r == 0.0 {
        return holds_now.then_some((0.0, f64::INFINITY));
    }
    let t = (b - v) / r;
    let grows_into = match op {
        BinOp::Ge | BinOp::Gt => r > 0.0,
        BinOp::Le | BinOp::Lt => r < 0.0,
        BinOp::Eq => {
            return if holds_now {
                Some((0.0, 0.0))
            } else if t > 0.0 {
                Some((t, t))
            } else {
                None
            }
        }
        _ => return None,
    };
    if grows_into {
        Some((if holds_now { 0.0 } else { t.max(0.0) }, f64::INFINITY))
    } else if holds_now {
        Some((0.0, t.max(0.0)))
    } else {
        None
    }
}

pub struct Simulator<'n> {
    pub net: &'n Network,
    pub cfg: EngineConfig,
}

impl<'n> Simulator<'n> {
    pub fn new(net: &'n Network, cfg: EngineConfig) -> Self {
        Simulator { net, cfg }
    }

    pub fn initial_state(&self) -> State {
        State {
            time: 0.0,
            locs: self.net.components.iter().map(|c| c.initial).collect(),
            vars: self.net.vars.iter().map(|v| v.init).collect(),
            clocks: self.net.clocks.iter().map(|c| c.init).collect(),
        }
    }

    /// Rate definition in force for every clock (None means rate 1).
    fn rate_sources(&self, state: &State) -> Vec<Option<&'n Rate>> {
        let mut src: Vec<Option<&Rate>> = vec![None; self.net.clocks.len()];
        for (ci, comp) in self.net.components.iter().enumerate() {
            let loc = &comp.locations[state.locs[ci]];
            if loc.committed {
                continue;
            }
            for r in &loc.rates {
                if src[r.clock].is_none() {
                    src[r.clock] = Some(r);
                }
            }
        }
        src
    }

    fn eval_rate(&self, r: Option<&Rate>, env: &Env, time: f64, clock: usize) -> Result<f64, EngineError> {
        let Some(r) = r else { return Ok(1.0) };
        let v = r
            .expr
            .eval_f64(env)
            .map_err(eval_err(format!("rate of {}", self.net.clocks[clock].name)))?;
        if !v.is_finite() {
            return Err(EngineError::NonFiniteRate {
                clock: self.net.clocks[clock].name.clone(),
                time,
            });
        }
        Ok(v)
    }

    /// Current rate of every clock.
    pub fn rates(&self, state: &State) -> Result<Vec<f64>, EngineError> {
        let src = self.rate_sources(state);
        let env = state.env();
        src.iter()
            .enumerate()
            .map(|(i, r)| self.eval_rate(*r, &env, state.time, i))
            .collect()
    }

    /// Lets `dt` time units pass: constant-rate clocks move exactly by `r*dt`,
    /// clocks whose rate depends on clocks are integrated with fixed-step RK4.
    pub fn integrate(&self, state: &mut State, dt: f64) -> Result<(), EngineError> {
        if dt <= 0.0 {
            return Ok(());
        }
        let src = self.rate_sources(state);
        let n_clocks = state.clocks.len();
        let mut fixed = vec![0.0; n_clocks];
        let mut dependent: Vec<(usize, &CExpr)> = Vec::new();
        {
            let env = state.env();
            for (i, r) in src.iter().enumerate() {
                match r {
                    Some(rate) if rate.clock_dependent => dependent.push((i, &rate.expr)),
                    _ => fixed[i] = self.eval_rate(*r, &env, state.time, i)?,
                }
            }
        }
        let x0 = state.clocks.clone();
        if !dependent.is_empty() {
            let steps = (dt / self.cfg.h_max).ceil().max(1.0) as usize;
            let h = dt / steps as f64;
            let mut y: Vec<f64> = dependent.iter().map(|(i, _)| x0[*i]).collect();
            let mut scratch = x0.clone();
            let m = y.len();
            let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            let mut ytmp = vec![0.0; m];
            let mut deriv = |t: f64, y: &[f64], out: &mut [f64]| -> Result<(), EngineError> {
                for i in 0..n_clocks {
                    scratch[i] = x0[i] + fixed[i] * t;
                }
                for (j, (ci, _)) in dependent.iter().enumerate() {
                    scratch[*ci] = y[j];
                }
                let env = Env {
                    locs: &state.locs,
                    vars: &state.vars,
                    clocks: &scratch,
                };
                for (j, (ci, expr)) in dependent.iter().enumerate() {
                    let v = expr
                        .eval_f64(&env)
                        .map_err(eval_err(format!("rate of {}", self.net.clocks[*ci].name)))?;
                    if !v.is_finite() {
                        return Err(EngineError::NonFiniteRate {
                            clock: self.net.clocks[*ci].name.clone(),
                            time: state.time + t,
                        });
                    }
                    out[j] = v;
                }
                Ok(())
            };
            let dep_idx: Vec<usize> = dependent.iter().map(|(i, _)| *i).collect();
            let time_only = !dependent.iter().any(|(_, e)| e.reads_clock(&|c| dep_idx.contains(&c)));
            if time_only {
                // y' = f(t): k2 == k3, and k4 of one step is k1 of the next
                let env = state.env();
                let nums: Vec<rate::Num> =
                    dependent.iter().map(|(_, e)| rate::Num::new(e, &env, &x0, &fixed)).collect();
                // the dependent clocks are not read, so their value is irrelevant here
                let y0 = y.clone();
                let mut f = |t: f64, out: &mut [f64]| -> Result<(), EngineError> {
                    for (j, n) in nums.iter().enumerate() {
                        match n.at(t) {
                            Some(v) if v.is_finite() => out[j] = v,
                            _ => return deriv(t, &y0, out),
                        }
                    }
                    Ok(())
                };
                f(0.0, &mut k1)?;
                for s in 0..steps {
                    let t0 = s as f64 * h;
                    f(t0 + 0.5 * h, &mut k2)?;
                    f((s + 1) as f64 * h, &mut k4)?;
                    for j in 0..m {
                        y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k2[j] + k4[j]);
                    }
                    std::mem::swap(&mut k1, &mut k4);
                }
            }
            for s in (0..steps).filter(|_| !time_only) {
                let t0 = s as f64 * h;
                deriv(t0, &y, &mut k1)?;
                for j in 0..m {
                    ytmp[j] = y[j] + 0.5 * h * k1[j];
                }
                deriv(t0 + 0.5 * h, &ytmp, &mut k2)?;
                for j in 0..m {
                    ytmp[j] = y[j] + 0.5 * h * k2[j];
                }
                deriv(t0 + 0.5 * h, &ytmp, &mut k3)?;
                for j in 0..m {
                    ytmp[j] = y[j] + h * k3[j];
                }
                deriv(t0 + h, &ytmp, &mut k4)?;
                for j in 0..m {
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
            for (j, (ci, _)) in dependent.iter().enumerate() {
                state.clocks[*ci] = y[j];
            }
        }
        let dep: Vec<usize> = dependent.iter().map(|(i, _)| *i).collect();
        for i in 0..n_clocks {
            if !dep.contains(&i) {
                state.clocks[i] = x0[i] + fixed[i] * dt;
            }
        }
        state.time += dt;
        Ok(())
    }

    fn constraint_window(
        &self,
        c: &Constraint,
        env: &Env,
        rates: &[f64],
        context: &str,
    ) -> Result<Option<Window>, EngineError> {
        for p in &c.plain {
            if !p.eval_bool(env).map_err(eval_err(context))? {
                return Ok(None);
            }
        }
        let mut w = (0.0, f64::INFINITY);
        for a in &c.atoms {
            let b = a.bound.eval_f64(env).map_err(eval_err(context))?;
            let Some(aw) = atom_window(env.clocks[a.clock], rates[a.clock], a.op, b) else {
                return Ok(None);
            };
            match intersect(w, aw) {
                Some(x) => w = x,
                None => return Ok(None),
            }
        }
        Ok(Some(w))
    }

    fn check_invariant(&self, state: &State, ci: usize) -> Result<(), EngineError> {
        let comp = &self.net.components[ci];
        let loc = &comp.locations[state.locs[ci]];
        if let Some(inv) = &loc.invariant {
            let ok = inv
                .holds(&state.env())
                .map_err(eval_err(format!("invariant of {}.{}", comp.name, loc.name)))?;
            if !ok {
                return Err(EngineError::InvariantViolated {
                    component: comp.name.clone(),
                    location: loc.name.clone(),
                    time: state.time,
                });
            }
        }
        Ok(())
    }

    /// Samples the delay of a non-committed component: `(delay, invariant bound)`.
    /// A component with no edge it can take on its own gets an infinite delay
    /// and consumes no randomness.
    pub fn sample_delay(
        &self,
        state: &State,
        ci: usize,
        rates: &[f64],
        rng: &mut RngStream,
    ) -> Result<(f64, f64), EngineError> {
        let comp = &self.net.components[ci];
        let loc = &comp.locations[state.locs[ci]];
        let env = state.env();
        let ctx = || format!("{}.{}", comp.name, loc.name);
        self.check_invariant(state, ci)?;
        let upper = match &loc.invariant {
            Some(inv) => match self.constraint_window(inv, &env, rates, &ctx())? {
                Some((_, hi)) => hi,
                None => 0.0,
            },
            None => f64::INFINITY,
        };
        let mut lower = f64::INFINITY;
        for &ei in &comp.outgoing[state.locs[ci]] {
            let e = &comp.edges[ei];
            if matches!(e.sync, Some((_, SyncDir::Receive))) {
                continue;
            }
            let w = match &e.guard {
                Some(g) => self.constraint_window(g, &env, rates, &format!("guard of {}", e.label))?,
                None => Some((0.0, f64::INFINITY)),
            };
            if let Some(w) = w.and_then(|w| intersect(w, (0.0, upper))) {
                lower = lower.min(w.0);
            }
        }
        if lower.is_infinite() {
            return Ok((f64::INFINITY, upper));
        }
        let d = if upper.is_finite() {
            rng.uniform(lower, upper.max(lower))
        } else {
            lower + rng.exponential(loc.exit_rate)
        };
        Ok((d, upper))
    }

    fn edge_enabled_alone(&self, state: &State, ci: usize, ei: usize) -> Result<bool, EngineError> {
        let e = &self.net.components[ci].edges[ei];
        if let Some(g) = &e.guard {
            if !g
                .holds(&state.env())
                .map_err(eval_err(format!("guard of {}", e.label)))?
            {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn receive_edges(&self, state: &State, ci: usize, ch: usize) -> Result<Vec<usize>, EngineError> {
        let comp = &self.net.components[ci];
        let mut out = Vec::new();
        for &ei in &comp.outgoing[state.locs[ci]] {
            if comp.edges[ei].sync == Some((ch, SyncDir::Receive)) && self.edge_enabled_alone(state, ci, ei)? {
                out.push(ei);
            }
        }
        Ok(out)
    }

    /// Edges `ci` can take on its own initiative right now.
    fn active_edges(&self, state: &State, ci: usize) -> Result<Vec<usize>, EngineError> {
        let comp = &self.net.components[ci];
        let mut out = Vec::new();
        for &ei in &comp.outgoing[state.locs[ci]] {
            let e = &comp.edges[ei];
            match e.sync {
                Some((_, SyncDir::Receive)) => continue,
                Some((ch, SyncDir::Emit)) if self.net.channels[ch].kind == ChannelKind::Binary => {
                    if !self.edge_enabled_alone(state, ci, ei)? {
                        continue;
                    }
                    let mut partner = false;
                    for &r in &self.net.receivers[ch] {
                        if r != ci && !self.receive_edges(state, r, ch)?.is_empty() {
                            partner = true;
                            break;
                        }
                    }
                    if partner {
                        out.push(ei);
                    }
                }
                _ => {
                    if self.edge_enabled_alone(state, ci, ei)? {
                        out.push(ei);
                    }
                }
            }
        }
        Ok(out)
    }

    fn apply_updates(&self, state: &mut State, ci: usize, ei: usize) -> Result<(), EngineError> {
        let e = &self.net.components[ci].edges[ei];
        for (slot, expr) in &e.updates {
            let v = expr
                .eval(&state.env())
                .map_err(eval_err(format!("update on {}", e.label)))?;
            match *slot {
                Slot::Var(i) => {
                    state.vars[i] = match (self.net.vars[i].init, v) {
                        (Value::Real(_), Value::Int(x)) => Value::Real(x as f64),
                        _ => v,
                    }
                }
                Slot::Clock(i) => {
                    state.clocks[i] = v.as_f64().ok_or_else(|| EngineError::Eval {
                        context: format!("update on {}", e.label),
                        source: EvalError::Type("clock assigned a non-number".into()),
                    })?
                }
            }
        }
        Ok(())
    }

    /// Fires an enabled edge of `ci` (weighted choice) with its synchronization partners.
    fn fire(&self, state: &mut State, ci: usize, rng: &mut RngStream) -> Result<Option<TraceEvent>, EngineError> {
        let enabled = self.active_edges(state, ci)?;
        if enabled.is_empty() {
            return Ok(None);
        }
        let comp = &self.net.components[ci];
        let weights: Vec<f64> = enabled.iter().map(|&e| comp.edges[e].weight).collect();
        let ei = enabled[rng.weighted(&weights)];
        let edge = &comp.edges[ei];
        let mut receivers = Vec::new();
        let channel = match edge.sync {
            Some((ch, SyncDir::Emit)) => {
                match self.net.channels[ch].kind {
                    ChannelKind::Broadcast => {
                        for &r in &self.net.receivers[ch] {
                            if r == ci {
                                continue;
                            }
                            let cand = self.receive_edges(state, r, ch)?;
                            if cand.is_empty() {
                                continue;
                            }
                            let rc = &self.net.components[r];
                            let w: Vec<f64> = cand.iter().map(|&e| rc.edges[e].weight).collect();
                            receivers.push((r, cand[rng.weighted(&w)]));
                        }
                    }
                    ChannelKind::Binary => {
                        let mut cands = Vec::new();
                        for &r in &self.net.receivers[ch] {
                            if r == ci {
                                continue;
                            }
                            let edges = self.receive_edges(state, r, ch)?;
                            if !edges.is_empty() {
                                cands.push((r, edges));
                            }
                        }
                        let (r, edges) = &cands[rng.index(cands.len())];
                        let rc = &self.net.components[*r];
                        let w: Vec<f64> = edges.iter().map(|&e| rc.edges[e].weight).collect();
                        receivers.push((*r, edges[rng.weighted(&w)]));
                    }
                }
                Some(ch)
            }
            _ => None,
        };
        self.apply_updates(state, ci, ei)?;
        for &(r, e) in &receivers {
            self.apply_updates(state, r, e)?;
        }
        state.locs[ci] = edge.target;
        for &(r, e) in &receivers {
            state.locs[r] = self.net.components[r].edges[e].target;
        }
        if self.cfg.check_invariants {
            for c in 0..self.net.components.len() {
                self.check_invariant(state, c)?;
            }
        }
        Ok(Some(TraceEvent {
            time: state.time,
            component: ci,
            edge: ei,
            channel,
            receivers,
            watch: Vec::new(),
        }))
    }

    fn plan(&self, state: &State, rng: &mut RngStream) -> Result<Plan, EngineError> {
        let comps = &self.net.components;
        let mut any_committed = false;
        for (ci, comp) in comps.iter().enumerate() {
            if comp.locations[state.locs[ci]].committed {
                any_committed = true;
                if !self.active_edges(state, ci)?.is_empty() {
                    return Ok(Plan::Fire {
                        comp: ci,
                        delay: 0.0,
                        at_limit: false,
                    });
                }
            }
        }
        if any_committed {
            return Ok(Plan::Stuck);
        }
        let rates = self.rates(state)?;
        let mut best = (f64::INFINITY, usize::MAX, f64::INFINITY);
        let mut umin = f64::INFINITY;
        for ci in 0..comps.len() {
            let (d, u) = self.sample_delay(state, ci, &rates, rng)?;
            umin = umin.min(u);
            if d < best.0 {
                best = (d, ci, u);
            }
        }
        let (d, ci, u) = best;
        if d.is_infinite() {
            return Ok(if umin.is_infinite() {
                Plan::Idle
            } else {
                Plan::Timelock { delay: umin }
            });
        }
        if d > umin + TIME_EPS {
            return Ok(Plan::Timelock { delay: umin });
        }
        Ok(Plan::Fire {
            comp: ci,
            delay: d,
            at_limit: d >= u - TIME_EPS,
        })
    }

    /// Advances to `state.time + dt`, reporting grid samples on the way.
    fn advance(
        &self,
        state: &mut State,
        dt: f64,
        grid: &mut Option<(f64, u64)>,
        obs: &mut dyn RunObserver,
    ) -> Result<(), EngineError> {
        let target = state.time + dt;
        if let Some((step, k)) = grid {
            loop {
                let g = *k as f64 * *step;
                if g > target + TIME_EPS * target.max(1.0) {
                    break;
                }
                let mut copy = state.clone();
                self.integrate(&mut copy, (g - state.time).max(0.0))?;
                copy.time = g;
                obs.on_sample(&copy)?;
                *k += 1;
            }
        }
        self.integrate(state, dt)?;
        state.time = target;
        Ok(())
    }

    /// One semantic step without observers. Time never passes `bound`.
    pub fn step(&self, state: &mut State, rng: &mut RngStream, bound: f64) -> Result<StepOutcome, EngineError> {
        struct Nop;
        impl RunObserver for Nop {
            fn on_state(&mut self, _: &State, _: Option<&TraceEvent>) -> Result<bool, EngineError> {
                Ok(true)
            }
        }
        self.step_with(state, rng, bound, &mut None, &mut Nop)
    }

    fn step_with(
        &self,
        state: &mut State,
        rng: &mut RngStream,
        bound: f64,
        grid: &mut Option<(f64, u64)>,
        obs: &mut dyn RunObserver,
    ) -> Result<StepOutcome, EngineError> {
        let to_bound = |s: &State| (bound - s.time).max(0.0);
        match self.plan(state, rng)? {
            Plan::Stuck => Ok(StepOutcome::End(EndReason::Deadlock)),
            Plan::Idle => {
                let dt = to_bound(state);
                self.advance(state, dt, grid, obs)?;
                state.time = bound;
                Ok(StepOutcome::End(EndReason::BoundReached))
            }
            Plan::Timelock { delay } => {
                if state.time + delay >= bound {
                    let dt = to_bound(state);
                    self.advance(state, dt, grid, obs)?;
                    state.time = bound;
                    Ok(StepOutcome::End(EndReason::BoundReached))
                } else {
                    self.advance(state, delay, grid, obs)?;
                    Ok(StepOutcome::End(EndReason::Deadlock))
                }
            }
            Plan::Fire { comp, delay, at_limit } => {
                if state.time + delay > bound {
                    let dt = to_bound(state);
                    self.advance(state, dt, grid, obs)?;
                    state.time = bound;
                    return Ok(StepOutcome::End(EndReason::BoundReached));
                }
                self.advance(state, delay, grid, obs)?;
                match self.fire(state, comp, rng)? {
                    Some(ev) => Ok(StepOutcome::Event(ev)),
                    None if at_limit || delay == 0.0 => Ok(StepOutcome::End(EndReason::Deadlock)),
                    None => Ok(StepOutcome::Silent),
                }
            }
        }
    }

    /// Runs up to `bound`, reporting to `obs`.
    pub fn run_observed(
        &self,
        bound: f64,
        rng: &mut RngStream,
        obs: &mut dyn RunObserver,
    ) -> Result<RunSummary, EngineError> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(EngineError::BadBound(bound));
        }
        let mut state = self.initial_state();
        let mut grid = obs.sample_step().map(|s| (s, 0u64));
        self.advance(&mut state, 0.0, &mut grid, obs)?;
        let mut steps = 0u64;
        let mut events = 0u64;
        if !obs.on_state(&state, None)? {
            obs.on_end(&state, EndReason::Stopped)?;
            return Ok(RunSummary {
                end_time: state.time,
                end_reason: EndReason::Stopped,
                steps,
                events,
            });
        }
        let reason = loop {
            steps += 1;
            if steps > self.cfg.max_steps {
                return Err(EngineError::Zeno(self.cfg.max_steps));
            }
            match self.step_with(&mut state, rng, bound, &mut grid, obs)? {
                StepOutcome::Event(ev) => {
                    events += 1;
                    if !obs.on_state(&state, Some(&ev))? {
                        break EndReason::Stopped;
                    }
                }
                StepOutcome::Silent => {}
                StepOutcome::End(r) => break r,
            }
        };
        obs.on_end(&state, reason)?;
        Ok(RunSummary {
            end_time: state.time,
            end_reason: reason,
            steps,
            events,
        })
    }

    /// Runs up to `bound` and records the full trace with `watch` evaluated
    /// after every event.
    pub fn run(&self, bound: f64, rng: &mut RngStream, watch: &[(String, CExpr)]) -> Result<Trace, EngineError> {
        let mut rec = Recorder {
            watch,
            trace: None,
        };
        self.run_observed(bound, rng, &mut rec)?;
        Ok(rec.trace.expect("run produced a trace"))
    }
}

struct Recorder<'a> {
    watch: &'a [(String, CExpr)],
    trace: Option<Trace>,
}

impl Recorder<'_> {
    fn values(&self, state: &State) -> Result<Vec<Value>, EngineError> {
        self.watch
            .iter()
            .map(|(n, e)| e.eval(&state.env()).map_err(eval_err(n.clone())))
            .collect()
    }
}

impl RunObserver for Recorder<'_> {
    fn on_state(&mut self, state: &State, event: Option<&TraceEvent>) -> Result<bool, EngineError> {
        let vals = self.values(state)?;
        match event {
            None => {
                self.trace = Some(Trace {
                    watch_names: self.watch.iter().map(|(n, _)| n.clone()).collect(),
                    initial: state.clone(),
                    initial_watch: vals,
                    events: Vec::new(),
                    end_time: state.time,
                    end_reason: EndReason::BoundReached,
                    final_watch: Vec::new(),
                })
            }
            Some(ev) => {
                let mut ev = ev.clone();
                ev.watch = vals;
                self.trace.as_mut().unwrap().events.push(ev);
            }
        }
        Ok(true)
    }

    fn on_end(&mut self, state: &State, reason: EndReason) -> Result<(), EngineError> {
        let vals = self.values(state)?;
        let t = self.trace.as_mut().unwrap();
        t.end_time = state.time;
        t.end_reason = reason;
        t.final_watch = vals;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
