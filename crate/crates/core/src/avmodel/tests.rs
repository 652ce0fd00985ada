use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;
use crate::dsl::parse_expr;
use crate::engine::{EndReason, EngineConfig, EngineError, RngStream, RunObserver, Simulator, State, TraceEvent};
use crate::network::{instantiate, CExpr, Env, Network};
use crate::validate_model;

#[test]
fn default_model_validates() {
    for cfg in [AvConfig::default(), AvConfig::unrefined()] {
        let m = build_av_model(&cfg).unwrap();
        let rep = validate_model(&m);
        assert!(rep.errors.is_empty(), "{:?}", rep.errors);
        let net = instantiate(&m).unwrap();
        assert_eq!(net.components.len(), 11);
        let names: Vec<&str> = net.components.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, COMPONENTS);
    }
}

#[test]
fn config_checks() {
    AvConfig::default().validate().unwrap();
    let bad = [
        AvConfig {
            braking_rate: 8.0,
            ..AvConfig::default()
        },
        AvConfig {
            turning_rate: 0.5,
            ..AvConfig::default()
        },
        AvConfig {
            camera_jitter: 35.0,
            ..AvConfig::default()
        },
        AvConfig {
            sign_weights: [30, 10, 10, 0, 10, 10, 10, 10],
            ..AvConfig::default()
        },
        AvConfig {
            const_speed_rate: -1.0,
            ..AvConfig::default()
        },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
    }
    let c = AvConfig::from_toml("braking_rate = 40.0\nrefined = false\n").unwrap();
    assert_eq!((c.braking_rate, c.refined, c.up_down_rate), (40.0, false, 8.0));
    assert!(matches!(AvConfig::from_toml("brakes = 1"), Err(AvConfigError::Toml(_))));
    assert!(matches!(
        AvConfig::from_toml("up_down_rate = 50.0"),
        Err(AvConfigError::Invalid(_))
    ));
}

#[test]
fn shipped_fixtures_match_the_generator() {
    assert_eq!(include_str!("../../../../models/av.sta"), av_source(&AvConfig::default()));
    assert_eq!(include_str!("../../../../models/av_unrefined.sta"), av_source(&AvConfig::unrefined()));
    assert_eq!(
        include_str!("../../../../models/requirements.q"),
        requirements_source(&AvConfig::default())
    );
    assert_eq!(include_str!("../../../../models/r16.q"), r16_source());
}

#[test]
fn requirement_suite_shape() {
    let f = requirement_file(&AvConfig::default());
    assert_eq!(f.constraints.len(), 7);
    let names: Vec<&str> = f.queries.iter().map(|q| q.name.as_str()).collect();
    assert_eq!(names.len(), 51);
    assert_eq!(names[0], "R1");
    assert_eq!(names[50], "R51");
    let r47 = f.queries.iter().find(|q| q.name == "R47").unwrap();
    assert_eq!(r47.query.to_string(), "Pr[<=3000]([] !CameraExec.fail) >= 0.95");
    for open in ["R13", "R15", "R18", "R19", "R28", "R32"] {
        assert!(f.queries.iter().find(|q| q.name == open).unwrap().expected.is_none());
    }
    // every query resolves against the composed model
    let model = crate::monitors::compose(&build_av_model(&AvConfig::default()).unwrap(), &f.constraints).unwrap();
    let net = instantiate(&model).unwrap();
    crate::smc::Checker::new(&net, EngineConfig::default(), Default::default(), 1)
        .unwrap()
        .run_query(&f.queries[0], None)
        .unwrap();
}

#[test]
fn sign_frequencies_follow_the_weights() {
    let cfg = AvConfig::default();
    let net = instantiate(&parse_model(&sign_source_harness(&cfg)).unwrap()).unwrap();
    let fires = 20_000;
    let tr = Simulator::new(&net, EngineConfig::default())
        .run(fires as f64 + 0.5, &mut RngStream::new(7, 0), &[])
        .unwrap();
    let mut counts = [0u64; 8];
    for e in &tr.events {
        for (c, edge) in &e.receivers {
            assert_eq!(*c, 0);
            counts[*edge] += 1;
        }
    }
    assert_eq!(counts.iter().sum::<u64>(), fires);
    let total = cfg.total_sign_weight() as f64;
    let chi2: f64 = counts
        .iter()
        .zip(cfg.sign_weights)
        .map(|(o, w)| {
            let e = fires as f64 * w as f64 / total;
            (*o as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new(7.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} counts {counts:?}");
}

fn compile(net: &Network, src: &str) -> CExpr {
    net.compile_expr(&parse_expr(src).unwrap()).unwrap().0
}

/// Checks per-state properties and tallies controller decisions.
struct Props {
    checks: Vec<(String, CExpr)>,
    energy: usize,
    last_energy: f64,
    ctrl: usize,
    ctrl_loc: usize,
    pmode: usize,
    sign: usize,
    /// decisions seen, indexed by [pmode][signType]
    decisions: [[u32; 6]; 7],
}

impl Props {
    fn new(net: &Network, checks: &[&str]) -> Self {
        let ctrl = net.component("Ctrl").unwrap();
        Props {
            checks: checks.iter().map(|c| (c.to_string(), compile(net, c))).collect(),
            energy: net.clock("energy.Con_en").unwrap(),
            last_energy: 0.0,
            ctrl,
            ctrl_loc: net.components[ctrl].location("ctrl").unwrap(),
            pmode: net.var("pmode").unwrap(),
            sign: net.var("signType").unwrap(),
            decisions: [[0; 6]; 7],
        }
    }
}

impl RunObserver for Props {
    fn on_state(&mut self, s: &State, _ev: Option<&TraceEvent>) -> Result<bool, EngineError> {
        let env = s.env();
        for (name, c) in &self.checks {
            assert!(c.eval_bool(&env).unwrap(), "{name} fails at t={}", s.time);
        }
        let e = s.clocks[self.energy];
        assert!(e >= self.last_energy, "energy decreased at t={}", s.time);
        self.last_energy = e;
        Ok(true)
    }

    fn on_end(&mut self, _s: &State, reason: EndReason) -> Result<(), EngineError> {
        assert_eq!(reason, EndReason::BoundReached);
        Ok(())
    }
}

impl Props {
    fn tally(&mut self, before: &Env) {
        if before.locs[self.ctrl] == self.ctrl_loc {
            let pm = before.vars[self.pmode].as_f64().unwrap() as usize;
            let sg = before.vars[self.sign].as_f64().unwrap() as usize;
            self.decisions[pm][sg] += 1;
        }
    }
}

/// Wraps `Props` to see the pre-state of every event.
struct Tally<'a> {
    props: &'a mut Props,
    prev: Option<State>,
}

impl RunObserver for Tally<'_> {
    fn on_state(&mut self, s: &State, ev: Option<&TraceEvent>) -> Result<bool, EngineError> {
        if let (Some(prev), Some(_)) = (&self.prev, ev) {
            self.props.tally(&prev.env());
        }
        self.prev = Some(s.clone());
        self.props.on_state(s, ev)
    }

    fn on_end(&mut self, s: &State, reason: EndReason) -> Result<(), EngineError> {
        self.props.on_end(s, reason)
    }
}

fn check_properties(cfg: &AvConfig, runs: u64) -> [[u32; 6]; 7] {
    let net = instantiate(&build_av_model(cfg).unwrap()).unwrap();
    let sim = Simulator::new(&net, EngineConfig::default());
    let mut props = Props::new(
        &net,
        &[
            "wvl >= 0 && wvr >= 0",
            "Ctrl.turn_left imply wvl <= wvr",
            "Ctrl.turn_right imply wvr <= wvl",
            "Stop.totally_stop imply (wvl == 0 && wvr == 0)",
            "Stop.braking imply wvl == wvr",
            "energy.stopped_mode imply average_speed == 0",
        ],
    );
    for run in 0..runs {
        props.last_energy = 0.0;
        let mut t = Tally {
            props: &mut props,
            prev: None,
        };
        sim.run_observed(3000.0, &mut RngStream::new(11, run), &mut t).unwrap();
    }
    props.decisions
}

#[test]
fn runs_respect_the_model_properties() {
    let d = check_properties(&AvConfig::default(), 30);
    for sign in 0..6 {
        assert!(d[0][sign] > 0 && d[6][sign] > 0, "{d:?}");
    }
    // speed changes finish within one camera period
    assert!(d[1].iter().chain(&d[2]).all(|n| *n == 0), "{d:?}");
}

#[test]
fn slow_acceleration_reaches_every_decision() {
    let cfg = AvConfig {
        acceleration: 0.5,
        ..AvConfig::default()
    };
    let d = check_properties(&cfg, 30);
    for pm in 0..2 {
        for sign in 0..6 {
            assert!(d[pm][sign] > 0, "pmode {pm} sign {sign}: {d:?}");
        }
    }
    // decelerations are short even here
    assert!(d[2].iter().sum::<u32>() > 0, "{d:?}");
}

#[test]
fn unrefined_model_can_stop_mid_turn() {
    let bad = "Stop.totally_stop && ((wvl == 0 && wvr > 0) || (wvr == 0 && wvl > 0))";
    let count = |cfg: &AvConfig| {
        let net = instantiate(&build_av_model(cfg).unwrap()).unwrap();
        let w = vec![(bad.to_string(), compile(&net, bad))];
        let sim = Simulator::new(&net, EngineConfig::default());
        (0..40)
            .filter(|run| {
                let tr = sim.run(3000.0, &mut RngStream::new(5, *run), &w).unwrap();
                tr.events.iter().any(|e| e.watch[0].as_bool() == Some(true))
            })
            .count()
    };
    assert!(count(&AvConfig::unrefined()) > 0);
    assert_eq!(count(&AvConfig::default()), 0);
}
