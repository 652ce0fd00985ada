use super::*;
use crate::dsl::parse_model;
use crate::network::instantiate;

fn net(src: &str) -> Network {
    instantiate(&parse_model(src).unwrap()).unwrap()
}

fn first_event_times(n: &Network, runs: u64) -> Vec<f64> {
    let sim = Simulator::new(n, EngineConfig::default());
    (0..runs)
        .map(|r| {
            let mut rng = RngStream::new(11, r);
            let mut s = sim.initial_state();
            match sim.step(&mut s, &mut rng, 1e6).unwrap() {
                StepOutcome::Event(e) => e.time,
                other => panic!("{other:?}"),
            }
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn bounded_invariant_gives_uniform_delay() {
    let n = net("clock x; template A() { init loc s { inv x <= 10; } loc t {} s -> t {} } system A;");
    let ts = first_event_times(&n, 10_000);
    assert!((mean(&ts) - 5.0).abs() < 0.2);
    assert!(ts.iter().all(|t| (0.0..=10.0).contains(t)));
}

#[test]
fn unbounded_location_gives_shifted_exponential() {
    let n = net("clock x; template A() { init loc s { exitrate 2; } loc t {} s -> t { guard x >= 1; } } system A;");
    let ts = first_event_times(&n, 10_000);
    assert!((mean(&ts) - 1.5).abs() < 0.05);
    assert!(ts.iter().all(|t| *t >= 1.0));
}

#[test]
fn ties_go_to_lowest_index() {
    let n = net(
        "clock x; int w = 0;
         template A(int k) { init loc s { inv x <= 1; } loc t {} s -> t { guard x >= 1; update w := k; } }
         system a = A(1), b = A(2);",
    );
    let sim = Simulator::new(&n, EngineConfig::default());
    for r in 0..20 {
        let tr = sim.run(5.0, &mut RngStream::new(1, r), &[]).unwrap();
        assert_eq!(tr.events[0].component, 0);
        assert_eq!(tr.events[0].time, 1.0);
    }
}

#[test]
fn race_picks_the_earliest_component() {
    let n = net(
        "clock x;
         template Fast() { init loc s { inv x <= 1; } loc t {} s -> t {} }
         template Slow() { init loc s { inv x <= 3; } loc t {} s -> t { guard x >= 2; } }
         system Slow, Fast;",
    );
    let sim = Simulator::new(&n, EngineConfig::default());
    for r in 0..200 {
        let tr = sim.run(10.0, &mut RngStream::new(5, r), &[]).unwrap();
        assert_eq!(tr.events[0].component, 1);
        assert_eq!(tr.events[1].component, 0);
    }
}

#[test]
fn weighted_choice_follows_weights() {
    let n = net(
        "template A() { init loc s { exitrate 1; } loc a {} loc b {}
           s -> a { weight 3; } s -> b { weight 1; } } system A;",
    );
    let sim = Simulator::new(&n, EngineConfig::default());
    let hits = (0..4000)
        .filter(|r| {
            let mut s = sim.initial_state();
            sim.step(&mut s, &mut RngStream::new(2, *r), 1e6).unwrap();
            s.locs[0] == 1
        })
        .count();
    let f = hits as f64 / 4000.0;
    assert!((f - 0.75).abs() < 0.03, "{f}");
}

#[test]
fn broadcast_moves_enabled_receivers_only() {
    let n = net(
        "broadcast chan go; int n = 0;
         template E() { clock x; init loc s { inv x <= 1; } loc d {} s -> d { guard x >= 1; sync go!; update n := 10; } }
         template R(bool ok) { init loc w {} loc g {} w -> g { guard ok; sync go?; update n := n + 1; } }
         system E, r1 = R(true), r2 = R(false), r3 = R(true);",
    );
    let sim = Simulator::new(&n, EngineConfig::default());
    let tr = sim.run(5.0, &mut RngStream::new(0, 0), &[]).unwrap();
    assert_eq!(tr.events.len(), 1);
    let ev = &tr.events[0];
    assert_eq!(ev.receivers.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 3]);
    let mut s = sim.initial_state();
    sim.step(&mut s, &mut RngStream::new(0, 0), 5.0).unwrap();
    assert_eq!(s.locs, vec![1, 1, 0, 1]);
    assert_eq!(s.vars[n.var("n").unwrap()], Value::Int(12));
}

#[test]
fn binary_emit_needs_a_receiver() {
    let n = net(
        "chan c;
         template E() { init loc s { exitrate 1; } loc d {} s -> d { sync c!; } }
         template R() { clock y; init loc w { inv y <= 4; } loc r {} loc g {} w -> r { guard y >= 4; } r -> g { sync c?; } }
         system E, R;",
    );
    let sim = Simulator::new(&n, EngineConfig::default());
    for r in 0..50 {
        let tr = sim.run(10.0, &mut RngStream::new(9, r), &[]).unwrap();
        let sync = tr.events.iter().find(|e| e.channel.is_some()).unwrap();
        assert!(sync.time >= 4.0 - 1e-9);
        assert_eq!(sync.receivers, vec![(1, 1)]);
    }
}

#[test]
fn committed_loop_is_reported_as_zeno() {
    let n = net("template A() { init committed loc s {} s -> s {} } system A;");
    let cfg = EngineConfig {
        max_steps: 1000,
        ..EngineConfig::default()
    };
    let err = Simulator::new(&n, cfg).run(10.0, &mut RngStream::new(0, 0), &[]).unwrap_err();
    assert!(err.to_string().contains("zeno/committed-loop"));
}

#[test]
fn committed_location_fires_without_delay() {
    let n = net(
        "clock x;
         template A() { init loc s { inv x <= 2; } committed loc c {} loc e {}
           s -> c { guard x >= 2; } c -> e {} }
         template B() { init loc s { exitrate 0.001; } loc t {} s -> t {} }
         system A, B;",
    );
    let tr = Simulator::new(&n, EngineConfig::default())
        .run(3.0, &mut RngStream::new(3, 0), &[])
        .unwrap();
    assert_eq!(tr.events[0].time, 2.0);
    assert_eq!(tr.events[1].time, 2.0);
    assert_eq!(tr.events[1].component, 0);
}

#[test]
fn model_without_edges_reaches_the_bound() {
    let n = net("template A() { init loc s {} } system A;");
    let tr = Simulator::new(&n, EngineConfig::default())
        .run(100.0, &mut RngStream::new(0, 0), &[])
        .unwrap();
    assert_eq!(tr.end_reason, EndReason::BoundReached);
    assert_eq!(tr.end_time, 100.0);
    assert!(tr.events.is_empty());
}

#[test]
fn exhausted_invariant_is_a_deadlock() {
    let n = net("clock x; template A() { init loc s { inv x <= 2; } loc t {} s -> t { guard x >= 5; } } system A;");
    let tr = Simulator::new(&n, EngineConfig::default())
        .run(100.0, &mut RngStream::new(0, 0), &[])
        .unwrap();
    assert_eq!(tr.end_reason, EndReason::Deadlock);
    assert!((tr.end_time - 2.0).abs() < 1e-9);
}

#[test]
fn affine_rate_matches_closed_form() {
    let n = net(
        "clock v = 30; clock en = 0;
         template A() { init loc s { rate v = 8; rate en = 0.1 * v; } } system A;",
    );
    let sim = Simulator::new(&n, EngineConfig::default());
    let mut s = sim.initial_state();
    sim.integrate(&mut s, 2.0).unwrap();
    let en = s.clocks[n.clock("en").unwrap()];
    assert!((en - 7.6).abs() / 7.6 < 1e-6, "{en}");
    assert_eq!(s.clocks[n.clock("v").unwrap()], 46.0);
}

#[test]
fn exponential_growth_is_accurate() {
    let n = net("clock x = 1; template A() { init loc s { rate x = x; } } system A;");
    let sim = Simulator::new(&n, EngineConfig::default());
    let mut s = sim.initial_state();
    sim.integrate(&mut s, 1.0).unwrap();
    assert!((s.clocks[0] - std::f64::consts::E).abs() < 1e-6);
}

#[test]
fn runs_are_deterministic_per_seed_and_run() {
    let n = net(
        "clock x; int k = 0;
         template A() { init loc s { inv x <= 3; } s -> s { guard x >= 1; update k := k + 1, x := 0; } }
         system A;",
    );
    let sim = Simulator::new(&n, EngineConfig::default());
    let watch = vec![("k".to_string(), n.compile_numeric(&crate::expr::Expr::name("k")).unwrap())];
    let a = sim.run(50.0, &mut RngStream::new(7, 3), &watch).unwrap();
    let b = sim.run(50.0, &mut RngStream::new(7, 3), &watch).unwrap();
    let c = sim.run(50.0, &mut RngStream::new(7, 4), &watch).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn samples_land_on_the_grid() {
    struct Grid(Vec<f64>);
    impl RunObserver for Grid {
        fn on_state(&mut self, _: &State, _: Option<&TraceEvent>) -> Result<bool, EngineError> {
            Ok(true)
        }
        fn sample_step(&self) -> Option<f64> {
            Some(0.5)
        }
        fn on_sample(&mut self, s: &State) -> Result<(), EngineError> {
            self.0.push(s.time);
            Ok(())
        }
    }
    let n = net("clock x; template A() { init loc s { inv x <= 1; } s -> s { guard x >= 1; update x := 0; } } system A;");
    let mut g = Grid(Vec::new());
    Simulator::new(&n, EngineConfig::default())
        .run_observed(3.0, &mut RngStream::new(0, 0), &mut g)
        .unwrap();
    assert_eq!(g.0.len(), 7);
    assert_eq!(g.0, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
}
