use statrs::distribution::{Beta, ContinuousCDF, StudentsT};

/// Monte Carlo runs guaranteeing `|p̂ - p| <= epsilon` with probability `1 - alpha`.
pub fn chernoff_runs(alpha: f64, epsilon: f64) -> u64 {
    ((2.0 / alpha).ln() / (2.0 * epsilon * epsilon)).ceil() as u64
}

/// Exact two-sided binomial interval at level `1 - alpha`.
pub fn clopper_pearson(successes: u64, n: u64, alpha: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let k = successes as f64;
    let n = n as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes as f64 == n {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Mean and two-sided t interval at level `1 - alpha`.
pub fn mean_interval(xs: &[f64], alpha: f64) -> (f64, (f64, f64)) {
    let n = xs.len() as f64;
    if xs.iter().all(|x| *x == xs[0]) {
        return (xs[0], (xs[0], xs[0]));
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, (mean, mean));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    if se == 0.0 {
        return (mean, (mean, mean));
    }
    let t = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().inverse_cdf(1.0 - alpha / 2.0);
    (mean, (mean - t * se, mean + t * se))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SprtDecision {
    /// H0: p >= p0 + delta.
    AcceptH0,
    /// H1: p <= p0 - delta.
    AcceptH1,
    Continue,
}

/// Wald's sequential probability ratio test between `p = hi` (H0) and `p = lo` (H1).
#[derive(Clone, Debug)]
pub struct Sprt {
    ln_succ: f64,
    ln_fail: f64,
    accept_h1: f64,
    accept_h0: f64,
    llr: f64,
    pub samples: u64,
    pub successes: u64,
}

impl Sprt {
    /// `alpha` bounds wrongly rejecting H0, `beta` wrongly accepting it.
    pub fn new(p0: f64, delta: f64, alpha: f64, beta: f64) -> Sprt {
        let hi = (p0 + delta).min(1.0);
        let lo = (p0 - delta).max(0.0);
        Sprt {
            ln_succ: (lo / hi).ln(),
            ln_fail: ((1.0 - lo) / (1.0 - hi)).ln(),
            accept_h1: ((1.0 - beta) / alpha).ln(),
            accept_h0: (beta / (1.0 - alpha)).ln(),
            llr: 0.0,
            samples: 0,
            successes: 0,
        }
    }

    pub fn observe(&mut self, success: bool) -> SprtDecision {
        self.samples += 1;
        if success {
            self.successes += 1;
            self.llr += self.ln_succ;
        } else {
            self.llr += self.ln_fail;
        }
        self.decision()
    }

    pub fn decision(&self) -> SprtDecision {
        if self.llr >= self.accept_h1 {
            SprtDecision::AcceptH1
        } else if self.llr <= self.accept_h0 {
            SprtDecision::AcceptH0
        } else {
            SprtDecision::Continue
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[min, max]`; a single zero-width bin when all values agree.
    pub fn build(xs: &[f64], bins: usize) -> Histogram {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if xs.is_empty() {
            return Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        if hi <= lo || bins == 0 {
            return Histogram {
                edges: vec![lo, lo],
                counts: vec![xs.len() as u64],
            };
        }
        let w = (hi - lo) / bins as f64;
        let edges = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + w * i as f64 })
            .collect();
        let mut counts = vec![0; bins];
        for &x in xs {
            let i = (((x - lo) / w) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chernoff_default() {
        assert_eq!(chernoff_runs(0.05, 0.05), 738);
        assert_eq!(chernoff_runs(0.05, 0.01), 18445);
    }

    /// Exact binomial tail sums used as an oracle for the interval ends.
    fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
        let mut term = (1.0 - p).powi(n as i32);
        let mut acc = term;
        for i in 1..=k {
            term *= (n - i + 1) as f64 / i as f64 * p / (1.0 - p);
            acc += term;
        }
        acc
    }

    #[test]
    fn clopper_pearson_matches_binomial_tails() {
        let (n, k, a) = (50, 12, 0.05);
        let (lo, hi) = clopper_pearson(k, n, a);
        // P(X >= k | lo) = a/2 and P(X <= k | hi) = a/2
        assert!((1.0 - binom_cdf(k - 1, n, lo) - a / 2.0).abs() < 1e-7);
        assert!((binom_cdf(k, n, hi) - a / 2.0).abs() < 1e-7);
        assert_eq!(clopper_pearson(0, 10, a).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, a).1, 1.0);
    }

    #[test]
    fn clopper_pearson_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 738;
        let hits = (0..2000)
            .filter(|_| {
                let k = (0..n).filter(|_| rng.random::<f64>() < 0.3).count() as u64;
                let (lo, hi) = clopper_pearson(k, n, 0.05);
                lo <= 0.3 && 0.3 <= hi
            })
            .count();
        assert!(hits >= 1860, "{hits}");
    }

    fn run_sprt(p: f64, p0: f64, rng: &mut ChaCha8Rng) -> (SprtDecision, u64) {
        let mut s = Sprt::new(p0, 0.01, 0.05, 0.05);
        loop {
            let d = s.observe(rng.random::<f64>() < p);
            if d != SprtDecision::Continue {
                return (d, s.samples);
            }
        }
    }

    #[test]
    fn sprt_verdicts_and_error_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (d, n) = run_sprt(0.99, 0.95, &mut rng);
        assert_eq!(d, SprtDecision::AcceptH0);
        assert!(n < 400, "{n}");
        assert_eq!(run_sprt(0.5, 0.95, &mut rng).0, SprtDecision::AcceptH1);
        let wrong = (0..500)
            .filter(|i| {
                if i % 2 == 0 {
                    run_sprt(0.55, 0.5, &mut rng).0 != SprtDecision::AcceptH0
                } else {
                    run_sprt(0.45, 0.5, &mut rng).0 != SprtDecision::AcceptH1
                }
            })
            .count();
        assert!(wrong <= 50, "{wrong}");
    }

    #[test]
    fn sprt_degenerate_hypotheses() {
        let mut s = Sprt::new(1.0, 0.01, 0.05, 0.05);
        assert_eq!(s.observe(false), SprtDecision::AcceptH1);
        let mut s = Sprt::new(0.0, 0.01, 0.05, 0.05);
        assert_eq!(s.observe(true), SprtDecision::AcceptH0);
    }

    #[test]
    fn mean_interval_and_histogram() {
        let (m, (lo, hi)) = mean_interval(&[4.2; 10], 0.05);
        assert_eq!((m, lo, hi), (4.2, 4.2, 4.2));
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (m, (lo, hi)) = mean_interval(&xs, 0.05);
        assert_eq!(m, 49.5);
        assert!(lo < 49.5 && hi > 49.5 && hi - lo < 12.0);
        let h = Histogram::build(&xs, 20);
        assert_eq!(h.counts, vec![5; 20]);
        assert_eq!(h.edges.len(), 21);
        assert_eq!(Histogram::build(&[4.2; 3], 20).counts, vec![3]);
    }
}
