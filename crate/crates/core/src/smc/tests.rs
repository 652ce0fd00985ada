use super::*;
use crate::dsl::{parse_model, parse_query};
use crate::engine::EngineConfig;
use crate::network::{instantiate, Network};
use crate::query::{NamedQuery, PathFormula, Query};

fn coin(heads: u32, tails: u32) -> Network {
    let src = format!(
        "template C() {{ init loc s {{ exitrate 1; }} loc h {{}} loc t {{}}
           s -> h {{ weight {heads}; }} s -> t {{ weight {tails}; }} }}
         clock x; system C;"
    );
    instantiate(&parse_model(&src).unwrap()).unwrap()
}

fn checker(n: &Network, workers: usize) -> Checker<'_> {
    Checker::new(n, EngineConfig::default(), StatConfig::default(), workers).unwrap()
}

fn formula(q: &str) -> (PathFormula, f64) {
    match parse_query(q).unwrap() {
        Query::Estimate { formula, bound } => (formula, bound),
        other => panic!("{other:?}"),
    }
}

fn named(q: &str) -> NamedQuery {
    NamedQuery {
        name: "q".into(),
        query: parse_query(q).unwrap(),
        expected: None,
        span: Default::default(),
    }
}

#[test]
fn estimate_uses_chernoff_runs() {
    let n = coin(30, 70);
    let (f, b) = formula("Pr[<=10](<> C.h)");
    let r = checker(&n, 2).estimate(&f, b).unwrap();
    assert_eq!(r.runs, 738);
    let p = r.p_hat.unwrap();
    assert!((0.25..=0.35).contains(&p), "{p}");
    let (lo, hi) = r.ci.unwrap();
    assert!(lo <= p && p <= hi);
    assert_eq!(r.verdict, Verdict::EstimateOnly);
    assert!(r.witness_run.is_some());
}

#[test]
fn globally_true_is_certain() {
    let n = coin(1, 1);
    let (f, b) = formula("Pr[<=10]([] true)");
    let r = checker(&n, 1).estimate(&f, b).unwrap();
    assert_eq!(r.p_hat, Some(1.0));
    assert_eq!(r.ci.unwrap().1, 1.0);
    assert_eq!(r.witness_run, None);
}

#[test]
fn hypothesis_verdicts() {
    let n = coin(99, 1);
    let c = checker(&n, 4);
    let (f, b) = formula("Pr[<=10](<> C.h)");
    let r = c.hypothesis(&f, b, 0.95, crate::query::Relation::Ge).unwrap();
    assert_eq!(r.verdict, Verdict::Valid);
    assert!(r.runs < 400, "{}", r.runs);
    let n = coin(1, 1);
    let c = checker(&n, 4);
    let r = c.hypothesis(&f, b, 0.95, crate::query::Relation::Ge).unwrap();
    assert_eq!(r.verdict, Verdict::Invalid);
    // Pr(h) <= 0.01 is false, Pr(h) <= 0.9 holds
    assert_eq!(
        c.hypothesis(&f, b, 0.01, crate::query::Relation::Le).unwrap().verdict,
        Verdict::Invalid
    );
    assert_eq!(
        c.hypothesis(&f, b, 0.9, crate::query::Relation::Le).unwrap().verdict,
        Verdict::Valid
    );
}

#[test]
fn comparisons() {
    let n = coin(30, 70);
    let c = checker(&n, 3);
    let (h, b) = formula("Pr[<=10](<> C.h)");
    let (t, _) = formula("Pr[<=10](<> C.t)");
    let (yes, _) = formula("Pr[<=10]([] true)");
    let (no, _) = formula("Pr[<=10](<> false)");
    assert_eq!(c.compare(&yes, b, &no, b).unwrap().verdict, Verdict::Valid);
    assert_eq!(c.compare(&no, b, &yes, b).unwrap().verdict, Verdict::Invalid);
    assert_eq!(c.compare(&yes, b, &yes, b).unwrap().verdict, Verdict::Valid);
    assert_eq!(c.compare(&t, b, &h, b).unwrap().verdict, Verdict::Valid);
    let r = c.compare(&h, b, &t, b).unwrap();
    assert_eq!(r.verdict, Verdict::Invalid);
    assert!(r.p_hat.unwrap() < r.p_hat2.unwrap());
}

#[test]
fn expected_extrema() {
    let n = coin(1, 1);
    let c = checker(&n, 2);
    let r = c.run_query(&named("E[<=10; 20](max: x)"), None).unwrap().0;
    assert_eq!(r.p_hat, Some(10.0));
    let r = c.run_query(&named("E[<=10; 20](min: 4.2)"), None).unwrap().0;
    assert_eq!(r.p_hat, Some(4.2));
    assert_eq!(r.ci, Some((4.2, 4.2)));
    assert_eq!(r.histogram.unwrap().counts, vec![20]);
}

#[test]
fn simulate_samples_grid_and_events() {
    let n = coin(1, 1);
    let c = checker(&n, 2);
    let (_, t) = c.run_query(&named("simulate 3 [<=10] {x}"), Some(0.5)).unwrap();
    let t = t.unwrap();
    assert_eq!(t.names, vec!["x"]);
    for run in 0..3 {
        let xs: Vec<f64> = t
            .rows
            .iter()
            .filter(|r| r.0 == run)
            .map(|r| r.2[0].as_f64().unwrap())
            .collect();
        // 21 grid points plus the single coin flip
        assert_eq!(xs.len(), 22);
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    }
    assert!(t.to_csv().starts_with("run,t,x\n0,0,0\n"));
}

#[test]
fn estimates_grow_with_the_bound() {
    let n = coin(1, 1);
    let c = checker(&n, 2);
    let ps: Vec<f64> = [0.5, 1.0, 3.0]
        .iter()
        .map(|b| {
            let (f, _) = formula("Pr[<=1](<> C.h)");
            c.estimate(&f, *b).unwrap().p_hat.unwrap()
        })
        .collect();
    assert!(ps[0] <= ps[1] && ps[1] <= ps[2], "{ps:?}");
}

#[test]
fn results_do_not_depend_on_workers() {
    let n = coin(30, 70);
    let qs = [
        "Pr[<=10](<> C.h)",
        "Pr[<=10](<> C.h) >= 0.2",
        "Pr[<=10](<> C.t) >= Pr[<=10](<> C.h)",
        "E[<=10; 50](max: x)",
    ];
    for q in qs {
        let mut a = checker(&n, 1).run_query(&named(q), None).unwrap().0;
        let mut b = checker(&n, 8).run_query(&named(q), None).unwrap().0;
        a.wall_ms = 0;
        b.wall_ms = 0;
        assert_eq!(a, b, "{q}");
    }
}

#[test]
fn path_formula_on_recorded_trace() {
    let n = coin(30, 70);
    let c = checker(&n, 1);
    let (f, b) = formula("Pr[<=10](<> C.h)");
    let expr = f.state_expr().clone();
    for run in 0..50 {
        let tr = c.trace(b, run, std::slice::from_ref(&expr)).unwrap();
        let on_trace = evaluate_path_formula(&tr, &f, b).unwrap();
        let direct = c.estimate_one(&f, b, run).unwrap();
        assert_eq!(on_trace, direct);
    }
    let tr = c.trace(b, 0, &[]).unwrap();
    assert!(evaluate_path_formula(&tr, &f, b).is_err());
}
