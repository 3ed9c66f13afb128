//! Closed-form average symbol error probabilities.
//!
//! All schemes assume i.i.d. uniform symbols. MOCSK decodes each slot on its
//! own; MOSK depends on the previous transmitted symbol through the residue
//! it leaves on its molecule type; CSK depends on both the previous
//! transmitted symbol (interference) and the previous decision (threshold
//! choice), so its error probabilities solve a linear system.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::modems::{decision_interval, law, Family, SchemeSpec, Symbol, ThresholdSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("scheme is {found}, expected {expected}")]
    WrongFamily { expected: Family, found: Family },
    #[error("threshold set does not fit the scheme")]
    Thresholds,
    #[error("CSK error-propagation system is singular or inconsistent")]
    InconsistentSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    Simulated,
}

/// Conditioning event of a conditional error probability. Fields that a
/// scheme's decoder does not depend on are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    pub current: usize,
    pub previous: Option<usize>,
    pub prev_decoded: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub family: Family,
    pub levels: usize,
    pub avg_pe: f64,
    /// `P(E | s_c)` for each transmitted symbol.
    pub per_symbol: Vec<f64>,
    pub conditional: Vec<(Condition, f64)>,
    pub method: Method,
    /// 95% interval halfwidth, simulated reports only.
    pub ci_halfwidth: Option<f64>,
}

impl ErrorReport {
    fn analytic(spec: &SchemeSpec, per_symbol: Vec<f64>, conditional: Vec<(Condition, f64)>) -> Self {
        let avg_pe = per_symbol.iter().sum::<f64>() / per_symbol.len() as f64;
        Self {
            family: spec.family(),
            levels: spec.levels(),
            avg_pe,
            per_symbol,
            conditional,
            method: Method::Analytic,
            ci_halfwidth: None,
        }
    }
}

pub fn error_prob(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    params: &ChannelParams,
) -> Result<ErrorReport, AnalysisError> {
    match spec.family() {
        Family::Csk => csk_error_prob(spec, thresholds, params),
        Family::Mosk => mosk_error_prob(spec, thresholds, params),
        Family::Mocsk => mocsk_error_prob(spec, thresholds, params),
    }
}

fn expect_family(spec: &SchemeSpec, thresholds: &ThresholdSet, family: Family) -> Result<(), AnalysisError> {
    if spec.family() != family {
        return Err(AnalysisError::WrongFamily { expected: family, found: spec.family() });
    }
    thresholds.validate(spec).map_err(|_| AnalysisError::Thresholds)
}

fn csk_rate(spec: &SchemeSpec, params: &ChannelParams, s_c: usize, s_p: usize) -> f64 {
    params.p1() * spec.rates()[s_c] + params.p2() * spec.rates()[s_p] + params.lambda0()
}

fn csk_row(thresholds: &ThresholdSet, prev_decoded: usize) -> &[u64] {
    thresholds.row(Symbol::from_index(prev_decoded)).expect("validated CSK thresholds")
}

/// Probability that CSK decodes `s_c` to `decoded`, given the previous
/// transmitted symbol `s_p` and previous decision `prev_decoded`.
fn csk_decode_prob(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    params: &ChannelParams,
    (s_c, s_p, prev_decoded): (usize, usize, usize),
    decoded: usize,
) -> f64 {
    let (lo, hi) = decision_interval(csk_row(thresholds, prev_decoded), decoded);
    law(csk_rate(spec, params, s_c, s_p)).interval(lo, hi)
}

fn csk_conditional_error(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    params: &ChannelParams,
    (s_c, s_p, prev_decoded): (usize, usize, usize),
) -> f64 {
    let (lo, hi) = decision_interval(csk_row(thresholds, prev_decoded), s_c);
    law(csk_rate(spec, params, s_c, s_p)).outside(lo, hi)
}

/// `P(decode s_c | s_c, s_p, prev_decoded)` for CSK.
pub fn conditional_success_csk(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    params: &ChannelParams,
    s_c: Symbol,
    s_p: Symbol,
    prev_decoded: Symbol,
) -> Result<f64, AnalysisError> {
    expect_family(spec, thresholds, Family::Csk)?;
    let cond = (s_c.value(), s_p.value(), prev_decoded.value());
    Ok(csk_decode_prob(spec, thresholds, params, cond, s_c.value()))
}

/// Stationary solution of the CSK error-propagation equations.
///
/// `misdecode[s * L + d]` is `P(decided d | sent s)` in steady state. Because
/// the next decision depends only on the current symbol, the previous symbol
/// and the previous decision, these probabilities satisfy
///
/// `q(c -> d) = (1/L) sum_{s_p, d_p} q(s_p -> d_p) P(decide d | c, s_p, d_p)`.
///
/// The diagonal is eliminated with `q(s -> s) = 1 - sum_{d != s} q(s -> d)`,
/// leaving `L (L - 1)` unknowns. For a binary alphabet this is the two-unknown
/// recursion `P(E|c) = sum P(s_p) P(d_p|s_p) P(E|c, s_p, d_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CskSolution {
    levels: usize,
    misdecode: Vec<f64>,
    /// `P(E | c, s_p, d_p)` indexed `(c * L + s_p) * L + d_p`.
    conditional_error: Vec<f64>,
    /// `P(decide d | c, s_p, d_p)` indexed `((c * L + s_p) * L + d_p) * L + d`.
    decode: Vec<f64>,
}

impl CskSolution {
    pub fn solve(spec: &SchemeSpec, thresholds: &ThresholdSet, params: &ChannelParams) -> Result<Self, AnalysisError> {
        expect_family(spec, thresholds, Family::Csk)?;
        let l = spec.levels();
        let mut decode = vec![0.0; l * l * l * l];
        let mut conditional_error = vec![0.0; l * l * l];
        for c in 0..l {
            for sp in 0..l {
                for dp in 0..l {
                    let cond = (c, sp, dp);
                    let base = ((c * l + sp) * l + dp) * l;
                    for d in 0..l {
                        if d != c {
                            decode[base + d] = csk_decode_prob(spec, thresholds, params, cond, d);
                        }
                    }
                    conditional_error[(c * l + sp) * l + dp] = csk_conditional_error(spec, thresholds, params, cond);
                    decode[base + c] = 1.0 - conditional_error[(c * l + sp) * l + dp];
                }
            }
        }

        // unknown index of the off-diagonal pair (s, d)
        let unknown = |s: usize, d: usize| s * (l - 1) + if d < s { d } else { d - 1 };
        let n = l * (l - 1);
        let inv_l = 1.0 / l as f64;
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for c in 0..l {
            for d in (0..l).filter(|&d| d != c) {
                let row = unknown(c, d);
                for sp in 0..l {
                    let at = |dp: usize| decode[((c * l + sp) * l + dp) * l + d];
                    let correct = at(sp);
                    b[row] += inv_l * correct;
                    for dp in (0..l).filter(|&dp| dp != sp) {
                        a[(row, unknown(sp, dp))] -= inv_l * (at(dp) - correct);
                    }
                }
            }
        }
        let x = a.lu().solve(&b).ok_or(AnalysisError::InconsistentSystem)?;
        if x.iter().any(|v| !v.is_finite() || *v < -1e-12 || *v > 1.0 + 1e-12) {
            return Err(AnalysisError::InconsistentSystem);
        }

        let mut misdecode = vec![0.0; l * l];
        for s in 0..l {
            let mut off = 0.0;
            for d in (0..l).filter(|&d| d != s) {
                let v = x[unknown(s, d)].clamp(0.0, 1.0);
                misdecode[s * l + d] = v;
                off += v;
            }
            if off > 1.0 + 1e-12 {
                return Err(AnalysisError::InconsistentSystem);
            }
            misdecode[s * l + s] = 1.0 - off;
        }
        Ok(Self { levels: l, misdecode, conditional_error, decode })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Steady-state `P(decided d | sent s)`.
    pub fn misdecode(&self, sent: usize, decided: usize) -> f64 {
        self.misdecode[sent * self.levels + decided]
    }

    /// `P(E | s)`.
    pub fn symbol_error(&self, sent: usize) -> f64 {
        (0..self.levels).filter(|&d| d != sent).map(|d| self.misdecode(sent, d)).sum()
    }

    pub fn conditional_error(&self, current: usize, previous: usize, prev_decoded: usize) -> f64 {
        let l = self.levels;
        self.conditional_error[(current * l + previous) * l + prev_decoded]
    }

    /// Largest mismatch when the solution is substituted into the right-hand
    /// side of both the per-symbol error recursion and the full misdecode
    /// equations.
    pub fn fixed_point_residual(&self) -> f64 {
        let l = self.levels;
        let inv_l = 1.0 / l as f64;
        let mut worst: f64 = 0.0;
        for c in 0..l {
            let mut rhs_err = 0.0;
            for sp in 0..l {
                for dp in 0..l {
                    rhs_err += inv_l * self.misdecode(sp, dp) * self.conditional_error(c, sp, dp);
                }
            }
            worst = worst.max(libm::fabs(self.symbol_error(c) - rhs_err));
            for d in 0..l {
                let mut rhs = 0.0;
                for sp in 0..l {
                    for dp in 0..l {
                        rhs += inv_l * self.misdecode(sp, dp) * self.decode[((c * l + sp) * l + dp) * l + d];
                    }
                }
                worst = worst.max(libm::fabs(self.misdecode(c, d) - rhs));
            }
        }
        worst
    }
}

pub fn csk_error_prob(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    params: &ChannelParams,
) -> Result<ErrorReport, AnalysisError> {
    let sol = CskSolution::solve(spec, thresholds, params)?;
    let l = spec.levels();
    let per_symbol = (0..l).map(|s| sol.symbol_error(s)).collect();
    let mut conditional = Vec::with_capacity(l * l * l);
    for c in 0..l {
        for sp in 0..l {
            for dp in 0..l {
                let cond = Condition { current: c, previous: Some(sp), prev_decoded: Some(dp) };
                conditional.push((cond, sol.conditional_error(c, sp, dp)));
            }
        }
    }
    Ok(ErrorReport::analytic(spec, per_symbol, conditional))
}

/// MOSK error probability given the current and previous symbols.
///
/// Success needs the current symbol's type above `tau` and every other type
/// at or below it. The previous symbol's type carries residue `p2 r` when it
/// differs from the current one; all types carry ambient noise.
pub fn mosk_conditional_error(spec: &SchemeSpec, tau: u64, params: &ChannelParams, s_c: usize, s_p: usize) -> f64 {
    let (p1, p2, l0) = (params.p1(), params.p2(), params.lambda0());
    let r = spec.rates();
    let tau = tau as i64;
    let mut log_success = 0.0;
    for ty in 0..spec.levels() {
        let mut rate = l0;
        if ty == s_c {
            rate += p1 * r[s_c];
        }
        if ty == s_p {
            rate += p2 * r[s_p];
        }
        let poisson = law(rate);
        // log of P(Y > tau) for the signalling type, P(Y <= tau) for the others
        let miss = if ty == s_c { poisson.cdf(tau) } else { poisson.sf(tau) };
        log_success += libm::log1p(-miss);
    }
    (-libm::expm1(log_success)).clamp(0.0, 1.0)
}

pub fn mosk_error_prob(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    params: &ChannelParams,
) -> Result<ErrorReport, AnalysisError> {
    expect_family(spec, thresholds, Family::Mosk)?;
    let ThresholdSet::Mosk(tau) = *thresholds else { unreachable!() };
    let l = spec.levels();
    let mut per_symbol = vec![0.0; l];
    let mut conditional = Vec::with_capacity(l * l);
    for (c, total) in per_symbol.iter_mut().enumerate() {
        for sp in 0..l {
            let pe = mosk_conditional_error(spec, tau, params, c, sp);
            *total += pe / l as f64;
            conditional.push((Condition { current: c, previous: Some(sp), prev_decoded: None }, pe));
        }
    }
    Ok(ErrorReport::analytic(spec, per_symbol, conditional))
}

/// MOCSK: the active type was silent in the previous slot, so only the
/// current rate and ambient noise reach the decoder.
pub fn mocsk_error_prob(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    params: &ChannelParams,
) -> Result<ErrorReport, AnalysisError> {
    expect_family(spec, thresholds, Family::Mocsk)?;
    let ThresholdSet::Mocsk(row) = thresholds else { unreachable!() };
    let per_symbol: Vec<f64> = spec
        .rates()
        .iter()
        .enumerate()
        .map(|(s, r)| {
            let (lo, hi) = decision_interval(row, s);
            law(params.p1() * r + params.lambda0()).outside(lo, hi)
        })
        .collect();
    let conditional = per_symbol
        .iter()
        .enumerate()
        .map(|(s, &pe)| (Condition { current: s, previous: None, prev_decoded: None }, pe))
        .collect();
    Ok(ErrorReport::analytic(spec, per_symbol, conditional))
}
