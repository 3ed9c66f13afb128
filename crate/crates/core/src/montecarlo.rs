//! Slot-by-slot simulation of a modulation scheme over the Poisson channel.
//!
//! Arrivals are drawn directly at the composed rate of each molecule type,
//! which by thinning and superposition has the same law as following each
//! molecule. CSK decisions feed back into the next slot's thresholds.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{Condition, ErrorReport, Method};
use crate::channel::{ChannelParams, PoissonSampler};
use crate::modems::{decode, Family, ModemError, SchemeSpec, Symbol, ThresholdSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("need at least two symbols (the first slot only warms up the channel)")]
    TooFewSymbols,
    #[error(transparent)]
    Modem(#[from] ModemError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheme: SchemeSpec,
    pub thresholds: ThresholdSet,
    pub params: ChannelParams,
    pub num_symbols: u64,
    pub seed: u64,
}

/// Error counts per `(current, previous, previous decision)` cell.
///
/// Tallies from independent replications merge by addition, so merging is
/// associative and order independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTally {
    levels: usize,
    trials: Vec<u64>,
    errors: Vec<u64>,
    /// Slots run but not scored.
    pub warmup: u64,
}

impl SimTally {
    pub fn new(levels: usize) -> Self {
        let cells = levels * levels * levels;
        Self { levels, trials: vec![0; cells], errors: vec![0; cells], warmup: 0 }
    }

    fn cell(&self, c: usize, sp: usize, dp: usize) -> usize {
        (c * self.levels + sp) * self.levels + dp
    }

    fn record(&mut self, c: usize, sp: usize, dp: usize, error: bool) {
        let i = self.cell(c, sp, dp);
        self.trials[i] += 1;
        self.errors[i] += u64::from(error);
    }

    pub fn merge(&mut self, other: &SimTally) {
        assert_eq!(self.levels, other.levels, "tallies of different alphabets");
        for (a, b) in self.trials.iter_mut().zip(&other.trials) {
            *a += b;
        }
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
        self.warmup += other.warmup;
    }

    pub fn total_trials(&self) -> u64 {
        self.trials.iter().sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.errors.iter().sum()
    }

    /// `(trials, errors)` of one condition cell.
    pub fn cell_counts(&self, current: usize, previous: usize, prev_decoded: usize) -> (u64, u64) {
        let i = self.cell(current, previous, prev_decoded);
        (self.trials[i], self.errors[i])
    }

    /// Error rate with the given conditioning fields marginalised out.
    pub fn rate_where(&self, keep: impl Fn(usize, usize, usize) -> bool) -> Option<f64> {
        let (mut n, mut e) = (0u64, 0u64);
        for c in 0..self.levels {
            for sp in 0..self.levels {
                for dp in 0..self.levels {
                    if keep(c, sp, dp) {
                        let (t, k) = self.cell_counts(c, sp, dp);
                        n += t;
                        e += k;
                    }
                }
            }
        }
        (n > 0).then(|| e as f64 / n as f64)
    }

    pub fn report(&self, family: Family) -> ErrorReport {
        let l = self.levels;
        let n = self.total_trials();
        let k = self.total_errors();
        let avg_pe = if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let per_symbol = (0..l).map(|c| self.rate_where(|cc, _, _| cc == c).unwrap_or(0.0)).collect();
        let mut conditional = Vec::new();
        for c in 0..l {
            for sp in 0..l {
                for dp in 0..l {
                    let (t, e) = self.cell_counts(c, sp, dp);
                    if t > 0 {
                        let cond = Condition { current: c, previous: Some(sp), prev_decoded: Some(dp) };
                        conditional.push((cond, e as f64 / t as f64));
                    }
                }
            }
        }
        ErrorReport {
            family,
            levels: l,
            avg_pe,
            per_symbol,
            conditional,
            method: Method::Simulated,
            ci_halfwidth: Some(ci_halfwidth(k, n)),
        }
    }
}

/// Simulate `num_symbols` slots and score all but the first.
///
/// Before slot 0 nothing has been emitted and the previous decision is
/// symbol 0.
pub fn simulate(config: &SimConfig) -> Result<ErrorReport, SimError> {
    Ok(simulate_tally(config)?.report(config.scheme.family()))
}

pub fn simulate_tally(config: &SimConfig) -> Result<SimTally, SimError> {
    if config.num_symbols < 2 {
        return Err(SimError::TooFewSymbols);
    }
    config.thresholds.validate(&config.scheme)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run(config, &mut rng)
}

fn run<R: Rng>(config: &SimConfig, rng: &mut R) -> Result<SimTally, SimError> {
    let spec = &config.scheme;
    let params = &config.params;
    let l = spec.levels();
    let types = spec.num_molecule_types();

    // Emission level 0 is silence, level s + 1 is rates[s]; samplers are
    // indexed by (current level, previous level) of one molecule type.
    let level_rate = |lv: usize| if lv == 0 { 0.0 } else { spec.rates()[lv - 1] };
    let samplers: Vec<PoissonSampler> = (0..=l)
        .flat_map(|cur| (0..=l).map(move |prev| (cur, prev)))
        .map(|(cur, prev)| {
            PoissonSampler::new(params.p1() * level_rate(cur) + params.p2() * level_rate(prev) + params.lambda0())
        })
        .collect();

    let mut tally = SimTally::new(l);
    let mut prev_levels = vec![0usize; types];
    let mut cur_levels = vec![0usize; types];
    let mut counts = vec![0u64; types];
    let mut prev_symbol = 0usize;
    let mut prev_decoded = Symbol::from_index(0);

    for slot in 0..config.num_symbols {
        let s = rng.random_range(0..l);
        let symbol = Symbol::from_index(s);
        cur_levels.iter_mut().for_each(|v| *v = 0);
        cur_levels[spec.active_type(symbol, slot)] = s + 1;
        for ty in 0..types {
            counts[ty] = samplers[cur_levels[ty] * (l + 1) + prev_levels[ty]].sample(rng);
        }
        let decision = decode(spec, &config.thresholds, &counts, prev_decoded, slot)?;
        if slot == 0 {
            tally.warmup += 1;
        } else {
            let error = decision.error_flagged || decision.symbol != symbol;
            tally.record(s, prev_symbol, prev_decoded.value(), error);
        }
        core::mem::swap(&mut prev_levels, &mut cur_levels);
        prev_symbol = s;
        prev_decoded = decision.symbol;
    }
    Ok(tally)
}

/// Halfwidth of a 95% interval for `errors` out of `trials`: the normal
/// approximation with at least 30 errors, the exact Clopper-Pearson
/// interval otherwise.
pub fn ci_halfwidth(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.5;
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    if errors >= 30 {
        return 1.959963984540054 * libm::sqrt(p * (1.0 - p) / n);
    }
    let (lo, hi) = clopper_pearson(errors, trials, 0.05);
    0.5 * (hi - lo)
}

/// Exact two-sided `1 - alpha` binomial interval.
pub fn clopper_pearson(errors: u64, trials: u64, alpha: f64) -> (f64, f64) {
    let tail = alpha / 2.0;
    let lower = if errors == 0 {
        0.0
    } else {
        // P(X >= errors; p) = tail, increasing in p
        bisect_p(|p| 1.0 - binomial_cdf(errors - 1, trials, p) - tail)
    };
    let upper = if errors == trials {
        1.0
    } else {
        // P(X <= errors; p) = tail, decreasing in p
        bisect_p(|p| tail - binomial_cdf(errors, trials, p))
    };
    (lower, upper)
}

/// Root in (0, 1) of a function increasing in `p`.
fn bisect_p(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    let ln_p = libm::log(p);
    let ln_q = libm::log1p(-p);
    let ln_nfact = libm::lgamma(nf + 1.0);
    let mut sum = 0.0;
    for j in 0..=k.min(n) {
        let jf = j as f64;
        let ln_term = ln_nfact - libm::lgamma(jf + 1.0) - libm::lgamma(nf - jf + 1.0) + jf * ln_p + (nf - jf) * ln_q;
        sum += libm::exp(ln_term);
    }
    sum.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::error_prob;
    use crate::modems::design_thresholds;

    fn config(spec: SchemeSpec, thresholds: ThresholdSet, params: ChannelParams, n: u64, seed: u64) -> SimConfig {
        SimConfig { scheme: spec, thresholds, params, num_symbols: n, seed }
    }

    #[test]
    fn noiseless_separation() {
        let params = ChannelParams::new(1.0, 0.0, 0.0).unwrap();
        let spec = SchemeSpec::with_rates(Family::Mocsk, vec![0.0, 1000.0]).unwrap();
        let cfg = config(spec, ThresholdSet::Mocsk(vec![500]), params, 100_000, 3);
        let report = simulate(&cfg).unwrap();
        assert!(report.avg_pe < 1e-6);
        assert_eq!(report.method, Method::Simulated);
    }

    #[test]
    fn same_seed_same_report() {
        let params = ChannelParams::new(0.22, 0.04, 20.0).unwrap();
        let spec = SchemeSpec::new(Family::Csk, 4, 30.0).unwrap();
        let thr = design_thresholds(&spec, &params).unwrap();
        let cfg = config(spec, thr, params, 20_000, 99);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        let other = SimConfig { seed: 100, ..cfg.clone() };
        assert_ne!(simulate_tally(&cfg).unwrap(), simulate_tally(&other).unwrap());
    }

    #[test]
    fn warmup_slot_is_excluded() {
        let params = ChannelParams::new(0.22, 0.04, 20.0).unwrap();
        let spec = SchemeSpec::new(Family::Mosk, 2, 30.0).unwrap();
        let thr = design_thresholds(&spec, &params).unwrap();
        let tally = simulate_tally(&config(spec, thr, params, 1000, 1)).unwrap();
        assert_eq!(tally.warmup, 1);
        assert_eq!(tally.total_trials(), 999);
    }

    #[test]
    fn too_few_symbols() {
        let params = ChannelParams::new(0.22, 0.04, 20.0).unwrap();
        let spec = SchemeSpec::new(Family::Mocsk, 2, 30.0).unwrap();
        let cfg = config(spec, ThresholdSet::Mocsk(vec![30]), params, 1, 1);
        assert_eq!(simulate(&cfg), Err(SimError::TooFewSymbols));
    }

    #[test]
    fn conditionals_aggregate_to_average() {
        let params = ChannelParams::new(0.22, 0.04, 20.0).unwrap();
        let spec = SchemeSpec::new(Family::Csk, 2, 20.0).unwrap();
        let thr = design_thresholds(&spec, &params).unwrap();
        let tally = simulate_tally(&config(spec, thr, params, 50_000, 5)).unwrap();
        let report = tally.report(Family::Csk);
        let n = tally.total_trials() as f64;
        let mut weighted = 0.0;
        for (cond, rate) in &report.conditional {
            let (t, _) = tally.cell_counts(cond.current, cond.previous.unwrap(), cond.prev_decoded.unwrap());
            weighted += rate * t as f64 / n;
        }
        assert!((weighted - report.avg_pe).abs() < 1e-12);
    }

    #[test]
    fn merge_is_order_independent() {
        let params = ChannelParams::new(0.22, 0.04, 20.0).unwrap();
        let spec = SchemeSpec::new(Family::Mocsk, 4, 20.0).unwrap();
        let thr = design_thresholds(&spec, &params).unwrap();
        let tallies: Vec<SimTally> = (0..3)
            .map(|seed| simulate_tally(&config(spec.clone(), thr.clone(), params, 5_000, seed)).unwrap())
            .collect();
        let mut ab_c = tallies[0].clone();
        ab_c.merge(&tallies[1]);
        ab_c.merge(&tallies[2]);
        let mut c_ba = tallies[2].clone();
        c_ba.merge(&tallies[1]);
        c_ba.merge(&tallies[0]);
        assert_eq!(ab_c, c_ba);
        assert_eq!(ab_c.warmup, 3);
    }

    #[test]
    fn residue_reaches_only_the_next_slot() {
        // p2 = 1: everything emitted arrives one slot late and never later.
        // BCSK with rates {0, 50} and no noise: the count in slot i equals a
        // Poisson(50) draw iff slot i-1 sent symbol 1.
        let params = ChannelParams::new(0.0, 1.0, 0.0).unwrap();
        let spec = SchemeSpec::with_rates(Family::Csk, vec![0.0, 50.0]).unwrap();
        // decode "1" whenever anything arrives
        let thr = ThresholdSet::Csk(vec![vec![1], vec![1]]);
        let tally = simulate_tally(&config(spec, thr, params, 20_000, 8)).unwrap();
        for c in 0..2 {
            for dp in 0..2 {
                // previous symbol 0: nothing arrives, decision is 0
                let (t, e) = tally.cell_counts(c, 0, dp);
                if t > 0 {
                    assert_eq!(e, if c == 0 { 0 } else { t });
                }
                // previous symbol 1: 50 expected arrivals, decision is 1
                let (t, e) = tally.cell_counts(c, 1, dp);
                if t > 0 {
                    assert_eq!(e, if c == 1 { 0 } else { t });
                }
            }
        }
    }

    #[test]
    fn mocsk_error_does_not_depend_on_previous_symbol() {
        let params = ChannelParams::new(0.22, 0.04, 20.0).unwrap();
        let spec = SchemeSpec::new(Family::Mocsk, 2, 15.0).unwrap();
        let thr = design_thresholds(&spec, &params).unwrap();
        let tally = simulate_tally(&config(spec, thr, params, 400_000, 12)).unwrap();
        let rate = |sp| tally.rate_where(|_, p, _| p == sp).unwrap();
        let n = |sp| {
            (0..2).flat_map(|c| (0..2).map(move |d| (c, d))).map(|(c, d)| tally.cell_counts(c, sp, d).0).sum::<u64>()
                as f64
        };
        let (r0, r1) = (rate(0), rate(1));
        let pooled = tally.total_errors() as f64 / tally.total_trials() as f64;
        let se = libm::sqrt(pooled * (1.0 - pooled) * (1.0 / n(0) + 1.0 / n(1)));
        assert!((r0 - r1).abs() < 4.0 * se, "{r0} vs {r1}");
    }

    #[test]
    fn simulation_tracks_analysis() {
        let params = ChannelParams::new(0.22, 0.04, 20.0).unwrap();
        for family in [Family::Csk, Family::Mosk, Family::Mocsk] {
            let spec = SchemeSpec::new(family, 2, 20.0).unwrap();
            let thr = design_thresholds(&spec, &params).unwrap();
            let exact = error_prob(&spec, &thr, &params).unwrap().avg_pe;
            let n = 200_000;
            let sim = simulate(&config(spec, thr, params, n, 77)).unwrap().avg_pe;
            let se = libm::sqrt(exact * (1.0 - exact) / (n - 1) as f64);
            assert!((sim - exact).abs() < 4.0 * se, "{family}: {sim} vs {exact}");
        }
    }

    #[test]
    fn interval_widths() {
        // normal approximation
        let h = ci_halfwidth(1000, 100_000);
        assert!((h - 1.96 * libm::sqrt(0.01 * 0.99 / 1e5)).abs() < 1e-6);
        // zero errors: the exact upper limit is 1 - 0.025^(1/n)
        let (lo, hi) = clopper_pearson(0, 1000, 0.05);
        assert_eq!(lo, 0.0);
        let expect = 1.0 - libm::pow(0.025, 1.0 / 1000.0);
        assert!((hi - expect).abs() < 1e-12);
        let (lo, hi) = clopper_pearson(5, 1000, 0.05);
        assert!(lo < 0.005 && 0.005 < hi);
        // Beta-quantile form of the same interval, computed with scipy
        assert!((lo - 0.00162541951756276).abs() < 1e-10, "{lo}");
        assert!((hi - 0.011629470559812147).abs() < 1e-10, "{hi}");
    }
}
