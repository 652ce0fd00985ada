//! Runs the vehicle requirement suite (or a subset) and prints each result.
//! Used to fit the braking energy coefficient.
//!
//!     cargo run --release --example calibrate -- [braking_rate] [R42 R16 ...]

use stasmc::avmodel::{build_av_model, requirement_file, AvConfig};
use stasmc::engine::EngineConfig;
use stasmc::monitors::compose;
use stasmc::network::instantiate;
use stasmc::smc::{Checker, StatConfig};

fn main() {
    let mut args = std::env::args().skip(1).peekable();
    let mut cfg = AvConfig::default();
    if let Some(br) = args.peek().and_then(|a| a.parse::<f64>().ok()) {
        cfg.braking_rate = br;
        args.next();
    }
    let only: Vec<String> = args.collect();
    cfg.validate().expect("config");
    let file = requirement_file(&cfg);
    let model = compose(&build_av_model(&cfg).unwrap(), &file.constraints).unwrap();
    let net = instantiate(&model).unwrap();
    let checker = Checker::new(&net, EngineConfig::default(), StatConfig::default(), 0).unwrap();
    for q in &file.queries {
        if !only.is_empty() && !only.contains(&q.name) {
            continue;
        }
        let (r, _) = checker.run_query(q, None).unwrap();
        let hist = r.histogram.as_ref().map(|_| {
            let inside = r.samples.iter().filter(|x| (300.0..=600.0).contains(*x)).count();
            format!(" in-band={:.2}", inside as f64 / r.samples.len() as f64)
        });
        println!(
            "{:5} {:?} p={:?} ci={:?} p2={:?} runs={} match={:?} {}ms{}",
            r.name,
            r.verdict,
            r.p_hat,
            r.ci,
            r.p_hat2,
            r.runs,
            r.matches,
            r.wall_ms,
            hist.unwrap_or_default()
        );
    }
}
