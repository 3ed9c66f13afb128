//! Information-theoretic lower bound on the symbol error probability of any
//! symbol-by-symbol decoder with one symbol of memory.
//!
//! The mutual information between a symbol and its decision is at most the
//! sum, over molecule types, of the per-type Poisson channel information
//! under peak (`r_max`) and average (`r_av`) rate constraints. Those per-type
//! terms are capped with the large-power asymptotic expressions (residual
//! terms dropped), and Fano's inequality turns the total into a lower bound
//! on the error probability.

use core::f64::consts::{E, LOG2_E, PI};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BoundError {
    #[error("need 0 < r_av <= r_max (got r_av={r_av}, r_max={r_max})")]
    Rates { r_av: f64, r_max: f64 },
    #[error("hitting probability must be in (0, 1] (got {0})")]
    HittingProbability(f64),
    #[error("need at least one molecule type")]
    NoMoleculeTypes,
    #[error("alphabet must have at least two symbols (got {0})")]
    Alphabet(u32),
    #[error("ratio {0} is outside (0, 1/3); ratios in [1/3, 1] use the high-ratio cap")]
    RatioOutsideLowRegime(f64),
    #[error("root solver failed to reach the requested residual for ratio {0}")]
    NoConvergence(f64),
}

/// Peak/average rate constraints and alphabet for the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    p1: f64,
    r_max: f64,
    r_av: f64,
    num_types: u32,
    alphabet_size: u32,
}

impl BoundParams {
    pub fn new(p1: f64, r_max: f64, r_av: f64, num_types: u32, alphabet_size: u32) -> Result<Self, BoundError> {
        if !(p1 > 0.0 && p1 <= 1.0) {
            return Err(BoundError::HittingProbability(p1));
        }
        if !(r_av > 0.0 && r_av <= r_max && r_max.is_finite()) {
            return Err(BoundError::Rates { r_av, r_max });
        }
        if num_types == 0 {
            return Err(BoundError::NoMoleculeTypes);
        }
        if alphabet_size < 2 {
            return Err(BoundError::Alphabet(alphabet_size));
        }
        Ok(Self { p1, r_max, r_av, num_types, alphabet_size })
    }

    /// Parameters with `r_av = ratio * r_max`.
    pub fn with_ratio(p1: f64, r_max: f64, ratio: f64, num_types: u32, alphabet_size: u32) -> Result<Self, BoundError> {
        Self::new(p1, r_max, ratio * r_max, num_types, alphabet_size)
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn r_av(&self) -> f64 {
        self.r_av
    }

    pub fn ratio(&self) -> f64 {
        self.r_av / self.r_max
    }

    pub fn num_types(&self) -> u32 {
        self.num_types
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `r_av / r_max` in `[1/3, 1]`: the average constraint is inactive.
    HighRatio,
    /// `r_av / r_max` in `(0, 1/3)`.
    LowRatio,
}

/// How the `(1 - r_av/r_max) mu` term of the low-ratio cap is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuUnits {
    /// Subtract `(1 - ratio) mu` next to the base-2 logarithms unchanged.
    #[default]
    AsPrinted,
    /// Treat `mu` as nats and convert: subtract `(1 - ratio) mu log2(e)`.
    Nats,
}

/// Per-type mutual-information cap in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiCap {
    /// Cap after clamping at zero; infinite when the low-ratio expression is undefined.
    pub g: f64,
    /// Expression value before clamping.
    pub raw: f64,
    pub regime: Regime,
    pub mu: Option<f64>,
    /// False when `p1 r_max <= 1` or the low-ratio logarithm is undefined;
    /// the asymptotic expressions mean nothing there.
    pub regime_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    pub cap: MiCap,
    /// `log2 |B| - M G`, the right-hand side Fano's inequality must reach.
    pub rhs: f64,
    pub pe_lower: f64,
    /// Fano gives nothing: `rhs <= 0`.
    pub vacuous: bool,
}

/// `1/(2 mu) - exp(-mu) / (sqrt(mu pi) erf(sqrt(mu)))`.
///
/// Decreases from `1/3` at `mu -> 0` to `0` as `mu -> inf`. Below `mu = 1`
/// the difference is evaluated as a ratio of two power series to avoid the
/// cancellation between the two terms.
pub fn mu_equation(mu: f64) -> f64 {
    if mu < 1.0 {
        // sqrt(mu pi) erf(sqrt mu) = 2 mu S(mu), and the numerator
        // S - exp(-mu) = 2 mu T(mu), with
        //   S = sum (-mu)^n / (n! (2n + 1)),  T = sum (-mu)^n / (n! (2n + 3)).
        let (mut s, mut t) = (0.0, 0.0);
        let mut power = 1.0;
        for n in 0..40 {
            let nf = n as f64;
            s += power / (2.0 * nf + 1.0);
            t += power / (2.0 * nf + 3.0);
            power *= -mu / (nf + 1.0);
        }
        t / s
    } else {
        let root = libm::sqrt(mu);
        0.5 / mu - libm::exp(-mu) / (libm::sqrt(mu * PI) * libm::erf(root))
    }
}

/// Residual target for [`solve_mu`].
pub const MU_RESIDUAL: f64 = 1e-10;

/// Solve `mu_equation(mu) = ratio` for `ratio` in `(0, 1/3)` by bisection.
pub fn solve_mu(ratio: f64) -> Result<f64, BoundError> {
    if !(ratio > 0.0 && ratio < 1.0 / 3.0) {
        return Err(BoundError::RatioOutsideLowRegime(ratio));
    }
    let f = |mu: f64| mu_equation(mu) - ratio;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(BoundError::NoConvergence(ratio));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = if libm::fabs(f(lo)) < libm::fabs(f(hi)) { lo } else { hi };
    if mu > 0.0 && libm::fabs(f(mu)) < MU_RESIDUAL {
        Ok(mu)
    } else {
        Err(BoundError::NoConvergence(ratio))
    }
}

/// Boundary between the two regimes, inclusive on the high side.
const ONE_THIRD: f64 = 1.0 / 3.0;
const RATIO_SLACK: f64 = 1e-12;

/// Cap on the per-type information `I(X_i; Y_i | X_{i-1})`, in bits.
///
/// High ratio: `0.5 log2(p1 r_max) + 0.5 log2(pi e / 2)`.
/// Low ratio: `0.5 log2(p1 r_max) - (1 - a) mu - 0.5 log2(2 pi e) - log2(0.5 - a mu)`
/// with `a = r_av / r_max` and `mu` from [`solve_mu`].
pub fn mi_cap(params: &BoundParams, units: MuUnits) -> Result<MiCap, BoundError> {
    let power = params.p1() * params.r_max();
    let base = 0.5 * libm::log2(power);
    let ratio = params.ratio();
    let power_ok = power > 1.0;
    let (raw, regime, mu, shape_ok) = if ratio >= ONE_THIRD - RATIO_SLACK {
        (base + 0.5 * libm::log2(PI * E / 2.0), Regime::HighRatio, None, true)
    } else {
        let mu = solve_mu(ratio)?;
        let slack = 0.5 - ratio * mu;
        let mu_term = match units {
            MuUnits::AsPrinted => (1.0 - ratio) * mu,
            MuUnits::Nats => (1.0 - ratio) * mu * LOG2_E,
        };
        if slack > 0.0 {
            let raw = base - mu_term - 0.5 * libm::log2(2.0 * PI * E) - libm::log2(slack);
            (raw, Regime::LowRatio, Some(mu), true)
        } else {
            (f64::INFINITY, Regime::LowRatio, Some(mu), false)
        }
    };
    Ok(MiCap { g: raw.max(0.0), raw, regime, mu, regime_valid: power_ok && shape_ok })
}

/// `H(p)` in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * libm::log2(x) };
    term(p) + term(1.0 - p)
}

/// Left-hand side of Fano's inequality, `H(p) + p log2(|B| - 1)`.
pub fn fano_lhs(p: f64, alphabet_size: u32) -> f64 {
    binary_entropy(p) + p * libm::log2((alphabet_size - 1) as f64)
}

/// Smallest `p` in `[0, (|B|-1)/|B|]` with `fano_lhs(p) >= target`.
pub fn invert_fano(target: f64, alphabet_size: u32) -> f64 {
    let top = (alphabet_size - 1) as f64 / alphabet_size as f64;
    if target <= 0.0 {
        return 0.0;
    }
    if target >= libm::log2(alphabet_size as f64) {
        return top;
    }
    let (mut lo, mut hi) = (0.0f64, top);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fano_lhs(mid, alphabet_size) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Lower bound on the average error probability with `M` molecule types.
pub fn pe_lower_bound(params: &BoundParams, units: MuUnits) -> Result<BoundResult, BoundError> {
    let cap = mi_cap(params, units)?;
    let entropy = libm::log2(params.alphabet_size() as f64);
    let rhs = entropy - params.num_types() as f64 * cap.g;
    debug_assert!(rhs <= entropy);
    let vacuous = rhs <= 0.0;
    let pe_lower = if vacuous { 0.0 } else { invert_fano(rhs, params.alphabet_size()) };
    Ok(BoundResult { cap, rhs, pe_lower, vacuous })
}
