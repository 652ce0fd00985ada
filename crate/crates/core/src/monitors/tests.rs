use super::*;
use crate::dsl::{parse_model, parse_query_file};
use crate::engine::{EngineConfig, RngStream, Simulator, Trace};
use crate::model::Model;
use crate::network::{instantiate, Network};

fn rec(pass: &[u8]) -> Vec<OccurrenceRecord> {
    pass.iter()
        .enumerate()
        .map(|(i, p)| OccurrenceRecord {
            index: i,
            quantity: 0.0,
            pass: *p == 1,
            incomplete: false,
        })
        .collect()
}

fn constraint(src: &str) -> WhConstraint {
    parse_query_file(src).unwrap().constraints.remove(0)
}

#[test]
fn execution_measurements() {
    use ExecEvent::*;
    let r = measure_execution(&[(0.0, Start), (300.0, Stop)], 200.0, 400.0).unwrap();
    assert_eq!((r[0].quantity, r[0].pass), (300.0, true));
    let r = measure_execution(
        &[(0.0, Start), (100.0, Preempt), (250.0, Resume), (400.0, Stop)],
        200.0,
        400.0,
    )
    .unwrap();
    assert_eq!((r[0].quantity, r[0].pass), (250.0, true));
    let r = measure_execution(&[(0.0, Start), (150.0, Stop)], 200.0, 400.0).unwrap();
    assert!(!r[0].pass);
    assert!(measure_execution(&[(5.0, Stop)], 0.0, 1.0).is_err());
    assert!(measure_execution(&[(0.0, Start), (5.0, Resume)], 0.0, 1.0).is_err());
}

#[test]
fn synchronization_measurements() {
    let r = measure_synchronization(&[vec![0.0], vec![10.0], vec![39.0]], 40.0);
    assert_eq!((r[0].quantity, r[0].pass), (39.0, true));
    let r = measure_synchronization(&[vec![0.0, 100.0], vec![10.0], vec![41.0]], 40.0);
    assert!(!r[0].pass);
    assert!(r[1].incomplete);
}

#[test]
fn periodic_and_end_to_end_measurements() {
    let band = PeriodBand::Fixed.band(700.0, 700.0, 100.0);
    assert_eq!(band, (600.0, 800.0));
    let r = measure_periodic(&[0.0, 650.0, 1400.0, 2200.0, 3010.0], band);
    let pass: Vec<bool> = r.iter().map(|x| x.pass).collect();
    assert_eq!(pass, vec![true, true, true, false]);
    assert!(measure_periodic(&[1.0], band).is_empty());
    assert_eq!(PeriodBand::PerOccurrence.band(30.0, 40.0, 5.0), (25.0, 45.0));
    let r = measure_end_to_end(&[0.0, 1000.0], &[250.0, 1700.0], 200.0, 600.0).unwrap();
    assert!(r[0].pass && !r[1].pass);
    assert!(measure_end_to_end(&[10.0], &[5.0], 0.0, 1.0).is_err());
}

#[test]
fn weakly_hard_windows() {
    assert_eq!(wh_judge(&rec(&[1, 1, 0, 1, 1]), 2, 3, ShortWindow::Proportional), (true, None));
    assert_eq!(wh_judge(&rec(&[1, 0, 0, 1]), 2, 3, ShortWindow::Proportional), (false, Some(0)));
    assert_eq!(wh_judge(&rec(&[1, 1, 1, 0]), 3, 3, ShortWindow::Proportional), (false, Some(1)));
    // short traces: ceil(19 * 4 / 20) = 4 passes needed
    assert!(!wh_judge(&rec(&[1, 1, 1, 0]), 19, 20, ShortWindow::Proportional).0);
    assert!(wh_judge(&rec(&[1, 1, 1, 0]), 19, 20, ShortWindow::Vacuous).0);
    assert!(wh_judge(&[], 1, 1, ShortWindow::Proportional).0);
}

#[test]
fn appending_a_pass_keeps_the_verdict() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let n = rng.random_range(0..12);
        let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let k = rng.random_range(1..5);
        let m = rng.random_range(1..=k);
        if wh_judge(&rec(&bits), m, k, ShortWindow::Proportional).0 {
            let mut more = bits.clone();
            more.push(1);
            assert!(wh_judge(&rec(&more), m, k, ShortWindow::Proportional).0, "{bits:?} {m} {k}");
        }
        let all = bits.iter().all(|b| *b == 1);
        assert_eq!(wh_judge(&rec(&bits), k, k, ShortWindow::Proportional).0, all);
    }
}

const WORLD: &str = "
broadcast chan start, stop, pre, res, tick, a, b, c, src, tgt;
chan hand;
template Worker() { clock x; clock y;
  init loc idle { inv x <= 10; } loc run { inv x <= 8; } loc held { inv y <= 3; rate x = 0; }
  idle -> run { guard x >= 2; sync start!; update x := 0; }
  run -> idle { guard x >= 1; sync stop!; weight 3; update x := 0; }
  run -> held { guard x >= 1; sync pre!; update y := 0; }
  held -> run { sync res!; }
}
template Ticker() { clock x;
  init loc s { inv x <= 40; }
  s -> s { guard x >= 30; sync tick!; update x := 0; }
}
template Chain() { clock x;
  init loc s0 { inv x <= 10; } loc s1 { inv x <= 2; } loc s2 { inv x <= 2; }
  s0 -> s1 { guard x >= 9; sync a!; update x := 0; }
  s1 -> s2 { sync b!; update x := 0; }
  s2 -> s0 { sync c!; update x := 0; }
}
template Pipe() { clock x;
  init loc s { inv x <= 20; } loc w { inv x <= 15; }
  s -> w { guard x >= 18; sync src!; update x := 0; }
  w -> s { guard x >= 5; sync tgt!; update x := 0; }
}
system Worker, Ticker, Chain, Pipe;";

const CONSTRAINTS: &str = "
constraint Exec execution(lower=1.2, upper=8, m=2, k=3) on start=start, stop=stop, preempt=pre, resume=res;
constraint Sync synchronization(tolerance=3.8, m=1, k=1) on e1=a, e2=b, e3=c;
constraint Per periodic(period=35, jitter=4) on occurrence=tick;
constraint E2E end_to_end(lower=6, upper=12) on source=src, target=tgt;";

fn world() -> (Model, Vec<WhConstraint>) {
    (parse_model(WORLD).unwrap(), parse_query_file(CONSTRAINTS).unwrap().constraints)
}

/// True iff some event moved the observer `name` into its `fail` location.
fn observer_failed(net: &Network, trace: &Trace, name: &str) -> bool {
    let ci = net.component(name).unwrap();
    let comp = &net.components[ci];
    let fail = comp.location("fail").unwrap();
    trace
        .events
        .iter()
        .flat_map(|e| &e.receivers)
        .any(|(c, e)| *c == ci && comp.edges[*e].target == fail)
}

#[test]
fn observers_agree_with_the_oracle() {
    let (model, cs) = world();
    let net = instantiate(&compose(&model, &cs).unwrap()).unwrap();
    let sim = Simulator::new(&net, EngineConfig::default());
    let mut fails = vec![0; cs.len()];
    for run in 0..300 {
        let trace = sim.run(400.0, &mut RngStream::new(17, run), &[]).unwrap();
        for (i, c) in cs.iter().enumerate() {
            let v = check_trace(&trace, &net, c, ShortWindow::Proportional).unwrap();
            assert_eq!(observer_failed(&net, &trace, &c.name), v.any_fail(), "{} run {run}", c.name);
            fails[i] += v.any_fail() as u32;
        }
    }
    // every constraint both passes and fails on some runs
    assert!(fails.iter().all(|f| *f > 0 && *f < 300), "{fails:?}");
}

#[test]
fn observers_are_pure_listeners() {
    let (model, cs) = world();
    let plain = instantiate(&model).unwrap();
    let watched = instantiate(&compose(&model, &cs).unwrap()).unwrap();
    for run in 0..50 {
        let a = Simulator::new(&plain, EngineConfig::default())
            .run(300.0, &mut RngStream::new(3, run), &[])
            .unwrap();
        let b = Simulator::new(&watched, EngineConfig::default())
            .run(300.0, &mut RngStream::new(3, run), &[])
            .unwrap();
        let strip = |t: &Trace| -> Vec<(f64, usize, usize)> {
            t.events.iter().map(|e| (e.time, e.component, e.edge)).collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }
}

#[test]
fn periodic_observer_catches_a_short_period() {
    let model = parse_model(
        "broadcast chan o; template S() { clock x; init loc s { inv x <= 500; }
           s -> s { guard x >= 500; sync o!; update x := 0; } } system S;",
    )
    .unwrap();
    let c = constraint("constraint P periodic(period=700, jitter=100) on occurrence=o;");
    let net = instantiate(&compose(&model, &[c]).unwrap()).unwrap();
    let tr = Simulator::new(&net, EngineConfig::default())
        .run(1200.0, &mut RngStream::new(0, 0), &[])
        .unwrap();
    assert!(observer_failed(&net, &tr, "P"));
    assert!((tr.events.iter().find(|e| !e.receivers.is_empty() && e.time > 600.0).unwrap().time - 1000.0).abs() < 1e-9);
}

#[test]
fn observer_binding_errors() {
    let (model, _) = world();
    let bin = constraint("constraint B periodic(period=5) on occurrence=hand;");
    assert!(matches!(build_observer(&bin, &model), Err(ObserverError::Binding(..))));
    let missing = constraint("constraint M periodic(period=5) on occurrence=nope;");
    assert!(build_observer(&missing, &model).is_err());
    let pred = constraint("constraint Q periodic(period=5) on occurrence=when(true);");
    assert!(build_observer(&pred, &model).is_err());
    let dup = constraint("constraint Worker periodic(period=5) on occurrence=tick;");
    assert!(matches!(compose(&model, &[dup]), Err(ObserverError::NameClash(_))));
}
