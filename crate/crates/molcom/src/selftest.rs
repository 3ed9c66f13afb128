//! Statistical checks of the Poisson channel primitives: total mass, cdf/pmf
//! consistency, and chi-square goodness of fit for superposition and
//! thinning of sampled counts.

use molcom_core::channel::sample_count;
use molcom_core::Poisson;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const SIGNIFICANCE: f64 = 0.01;
pub const SAMPLES: usize = 100_000;
pub const MASS_TOL: f64 = 1e-12;
pub const CDF_TOL: f64 = 1e-13;
/// Expected count below which neighbouring bins are pooled.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against a Poisson law, with tail
/// bins pooled until every bin expects at least five samples.
pub fn chi_square(samples: &[u64], law: &Poisson) -> ChiSquare {
    let n = samples.len() as f64;
    let max = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut observed = vec![0u64; max + 1];
    for &s in samples {
        observed[s as usize] += 1;
    }

    // Bins [edges[i], edges[i+1]); the first starts at 0 and the last is open.
    let mut edges = vec![0u64];
    let mut mass = 0.0;
    let mut k = 0u64;
    loop {
        mass += law.pmf(k);
        k += 1;
        let rest = law.sf(k as i64 - 1);
        if mass * n >= MIN_EXPECTED && rest * n >= MIN_EXPECTED {
            edges.push(k);
            mass = 0.0;
        }
        if rest * n < MIN_EXPECTED {
            break;
        }
    }

    let mut statistic = 0.0;
    let bins = edges.len();
    for (i, &lo) in edges.iter().enumerate() {
        let hi = edges.get(i + 1).copied();
        let expected = n * law.interval(lo, hi);
        let obs: u64 = observed
            .iter()
            .enumerate()
            .filter(|&(k, _)| k as u64 >= lo && hi.is_none_or(|h| (k as u64) < h))
            .map(|(_, c)| c)
            .sum();
        statistic += (obs as f64 - expected).powi(2) / expected;
    }
    let dof = bins.saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(f64::NAN);
    ChiSquare { statistic, dof, p_value }
}

fn chi_check(name: String, samples: &[u64], law: &Poisson) -> Check {
    let c = chi_square(samples, law);
    Check {
        name,
        passed: c.p_value > SIGNIFICANCE,
        detail: format!("chi2 = {:.2} on {} dof, p = {:.4}", c.statistic, c.dof, c.p_value),
    }
}

/// `sample_count(l1) + sample_count(l2)` against `Poisson(l1 + l2)`.
pub fn superposition(l1: f64, l2: f64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<u64> =
        (0..SAMPLES).map(|_| sample_count(l1, &mut rng).unwrap() + sample_count(l2, &mut rng).unwrap()).collect();
    let law = Poisson::new(l1 + l2).unwrap();
    chi_check(format!("superposition {l1} + {l2}"), &samples, &law)
}

/// Each molecule of a `Poisson(x)` emission survives with probability `p`;
/// the survivors should follow `Poisson(p x)`.
pub fn thinning(x: f64, p: f64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<u64> = (0..SAMPLES)
        .map(|_| {
            let emitted = sample_count(x, &mut rng).unwrap();
            Binomial::new(emitted, p).unwrap().sample(&mut rng)
        })
        .collect();
    let law = Poisson::new(p * x).unwrap();
    chi_check(format!("thinning {x} x {p}"), &samples, &law)
}

/// Partial sum of the pmf up to `lambda + 20 sqrt(lambda) + 20`.
pub fn mass(lambda: f64) -> Check {
    let law = Poisson::new(lambda).unwrap();
    let top = (lambda + 20.0 * lambda.sqrt() + 20.0).ceil() as u64;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in 0..=top {
        let y = law.pmf(k) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let err = (sum - 1.0).abs();
    Check { name: format!("pmf mass at {lambda}"), passed: err < MASS_TOL, detail: format!("|sum - 1| = {err:.3e}") }
}

/// `cdf(k) - cdf(k - 1) = pmf(k)` over the bulk of the law.
pub fn cdf_consistency(lambda: f64) -> Check {
    let law = Poisson::new(lambda).unwrap();
    let top = (lambda + 20.0 * lambda.sqrt() + 20.0).ceil() as i64;
    let lo = (lambda - 20.0 * lambda.sqrt()).floor().max(0.0) as i64;
    let worst = (lo..=top).map(|k| (law.cdf(k) - law.cdf(k - 1) - law.pmf(k as u64)).abs()).fold(0.0, f64::max);
    Check {
        name: format!("cdf consistency at {lambda}"),
        passed: worst < CDF_TOL,
        detail: format!("max deviation {worst:.3e}"),
    }
}

pub const MASS_RATES: [f64; 8] = [1e-3, 0.5, 4.4, 20.0, 100.0, 1234.5, 1e4, 1e6];

/// Every check with its fixed seed, in a stable order.
pub fn run_all() -> Vec<Check> {
    let mut checks: Vec<Check> = MASS_RATES.iter().map(|&l| mass(l)).collect();
    checks.extend(MASS_RATES.iter().map(|&l| cdf_consistency(l)));
    // rates met in the default sweeps: signal plus ambient noise, and the
    // fraction of an emission arriving in the current / next slot
    checks.push(superposition(22.0, 20.0, 11));
    checks.push(superposition(0.8, 3.5, 12));
    checks.push(thinning(100.0, 0.22, 13));
    checks.push(thinning(250.0, 0.04, 14));
    checks
}
