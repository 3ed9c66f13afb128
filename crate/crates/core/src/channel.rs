//! Poisson arithmetic for the diffusion channel.
//!
//! The number of molecules of one type counted in a slot is Poisson with
//! rate `p1 * x_current + p2 * x_previous + lambda0`: a molecule released in
//! a slot hits the receiver in that slot with probability `p1`, in the next
//! slot with probability `p2`, and never afterwards. Ambient molecules add an
//! independent Poisson(`lambda0`) count.

use rand::Rng;
use rand_distr::Distribution;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ChannelError {
    #[error("hitting probabilities must satisfy 0 <= p1, 0 <= p2, p1 + p2 <= 1 (got p1={p1}, p2={p2})")]
    HittingProbabilities { p1: f64, p2: f64 },
    #[error("ambient noise rate must be finite and >= 0 (got {0})")]
    NoiseRate(f64),
    #[error("diffusion rate must be finite and >= 0 (got {0})")]
    DiffusionRate(f64),
    #[error("Poisson rate must be finite and >= 0 (got {0})")]
    PoissonRate(f64),
}

/// Hitting probabilities and ambient noise for one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    p1: f64,
    p2: f64,
    lambda0: f64,
}

impl ChannelParams {
    pub fn new(p1: f64, p2: f64, lambda0: f64) -> Result<Self, ChannelError> {
        let ok = p1.is_finite() && p2.is_finite() && p1 >= 0.0 && p2 >= 0.0 && p1 + p2 <= 1.0;
        if !ok {
            return Err(ChannelError::HittingProbabilities { p1, p2 });
        }
        if !(lambda0.is_finite() && lambda0 >= 0.0) {
            return Err(ChannelError::NoiseRate(lambda0));
        }
        Ok(Self { p1, p2, lambda0 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// Same channel with a different next-slot hitting probability.
    pub fn with_p2(&self, p2: f64) -> Result<Self, ChannelError> {
        Self::new(self.p1, p2, self.lambda0)
    }

    /// Rate of the received count for one molecule type, given what that
    /// type emitted this slot and the slot before.
    pub fn received_rate(&self, emission: EmissionPair) -> f64 {
        self.p1 * emission.x_current + self.p2 * emission.x_previous + self.lambda0
    }
}

/// Diffusion rates of a single molecule type in the current and previous slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionPair {
    x_current: f64,
    x_previous: f64,
}

impl EmissionPair {
    pub fn new(x_current: f64, x_previous: f64) -> Result<Self, ChannelError> {
        for x in [x_current, x_previous] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(ChannelError::DiffusionRate(x));
            }
        }
        Ok(Self { x_current, x_previous })
    }

    pub fn x_current(&self) -> f64 {
        self.x_current
    }

    pub fn x_previous(&self) -> f64 {
        self.x_previous
    }
}

pub fn received_rate(emission: EmissionPair, params: &ChannelParams) -> f64 {
    params.received_rate(emission)
}

/// Relative size below which a tail term no longer changes the running sum.
const TAIL_EPS: f64 = 1e-18;

/// Poisson law with rate `lambda >= 0`. A zero rate is a point mass at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poisson {
    lambda: f64,
}

impl Poisson {
    pub fn new(lambda: f64) -> Result<Self, ChannelError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(ChannelError::PoissonRate(lambda));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `ln pmf(k)` in saddle-point form, `-stirlerr(k) - bd0(k, lambda) -
    /// ln(2 pi k) / 2`, which keeps near full relative precision even where
    /// `k ln(lambda)` and `ln(k!)` are large and nearly cancel.
    pub fn ln_pmf(&self, k: u64) -> f64 {
        if self.lambda == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if k == 0 {
            return -self.lambda;
        }
        let kf = k as f64;
        -stirlerr(k) - bd0(kf, self.lambda) - 0.5 * libm::log(2.0 * core::f64::consts::PI * kf)
    }

    pub fn pmf(&self, k: u64) -> f64 {
        libm::exp(self.ln_pmf(k))
    }

    /// `P(Y <= k)`; zero for negative `k`.
    ///
    /// Below the mean the lower tail is summed directly, above it the upper
    /// tail is summed and subtracted, so each side stays accurate where it
    /// is small.
    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        if (k as f64) < self.lambda {
            self.lower_tail(k as u64)
        } else {
            1.0 - self.upper_tail(k as u64 + 1)
        }
    }

    /// `P(Y > k)`; one for negative `k`.
    pub fn sf(&self, k: i64) -> f64 {
        if k < 0 {
            return 1.0;
        }
        if (k as f64) < self.lambda {
            1.0 - self.lower_tail(k as u64)
        } else {
            self.upper_tail(k as u64 + 1)
        }
    }

    /// `P(lo <= Y < hi)` with `hi = None` meaning unbounded above.
    ///
    /// Intervals lying entirely in one tail are differenced within that tail
    /// so small probabilities keep their relative accuracy.
    pub fn interval(&self, lo: u64, hi: Option<u64>) -> f64 {
        let p = match hi {
            Some(hi) if hi <= lo => return 0.0,
            Some(hi) if (hi as f64) <= self.lambda => self.cdf(hi as i64 - 1) - self.cdf(lo as i64 - 1),
            _ if (lo as f64) > self.lambda => self.sf(lo as i64 - 1) - hi.map_or(0.0, |h| self.sf(h as i64 - 1)),
            _ => 1.0 - self.outside(lo, hi),
        };
        p.clamp(0.0, 1.0)
    }

    /// `P(Y < lo) + P(Y >= hi)`, i.e. the mass outside `[lo, hi)`.
    pub fn outside(&self, lo: u64, hi: Option<u64>) -> f64 {
        if let Some(hi) = hi {
            if hi <= lo {
                return 1.0;
            }
        }
        let below = self.cdf(lo as i64 - 1);
        let above = hi.map_or(0.0, |h| self.sf(h as i64 - 1));
        (below + above).clamp(0.0, 1.0)
    }

    /// Sum of pmf(j) for j <= k, accumulated from k downwards. Requires k < lambda
    /// so the terms shrink monotonically.
    fn lower_tail(&self, k: u64) -> f64 {
        let mut term = self.pmf(k);
        let mut sum = Kahan::default();
        let mut j = k;
        loop {
            sum.add(term);
            if j == 0 || term <= sum.value() * TAIL_EPS {
                break;
            }
            term *= j as f64 / self.lambda;
            j -= 1;
        }
        sum.value().min(1.0)
    }

    /// Sum of pmf(j) for j >= k, accumulated upwards. Requires k > lambda - 1.
    fn upper_tail(&self, k: u64) -> f64 {
        let mut term = self.pmf(k);
        let mut sum = Kahan::default();
        let mut j = k;
        loop {
            sum.add(term);
            if term <= sum.value() * TAIL_EPS || term == 0.0 {
                break;
            }
            j += 1;
            term *= self.lambda / j as f64;
        }
        sum.value().min(1.0)
    }

    /// One variate. The stream is reproducible for a seeded generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        PoissonSampler::new(self.lambda).sample(rng)
    }
}

/// Precomputed sampler for a fixed rate; reuse it inside simulation loops.
#[derive(Debug, Clone, Copy)]
pub(crate) enum PoissonSampler {
    Zero,
    Positive(rand_distr::Poisson<f64>),
}

impl PoissonSampler {
    pub(crate) fn new(lambda: f64) -> Self {
        match rand_distr::Poisson::new(lambda) {
            Ok(p) if lambda > 0.0 => Self::Positive(p),
            _ => Self::Zero,
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Zero => 0,
            Self::Positive(p) => p.sample(rng) as u64,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// `ln(n!) - ln(sqrt(2 pi n) (n / e)^n)`, the error of Stirling's formula.
fn stirlerr(n: u64) -> f64 {
    #[allow(clippy::excessive_precision)]
    const TABLE: [f64; 16] = [
        0.0,
        0.08106146679532725821967,
        0.04134069595540929409382,
        0.02767792568499833914879,
        0.02079067210376509311152,
        0.01664469118982119216319,
        0.01387612882307074799875,
        0.01189670994589177009506,
        0.01041126526197209649748,
        0.009255462182712732917729,
        0.008330563433362871256469,
        0.007573675487951840794972,
        0.006942840107209529865664,
        0.00640899418800420706844,
        0.005951370112758847735624,
        0.005554733551962801371039,
    ];
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if let Some(&v) = TABLE.get(n as usize) {
        return v;
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// `x ln(x / m) + m - x`, the deviance term, without cancellation when
/// `x` is close to `m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let next = s + ej / f64::from(2 * j + 1);
            if next == s {
                return next;
            }
            s = next;
        }
        return s;
    }
    let ratio = x / m;
    let log_ratio = if ratio.is_finite() && ratio > 0.0 { libm::log(ratio) } else { libm::log(x) - libm::log(m) };
    x * log_ratio + m - x
}

/// `e^{-lambda} lambda^k / k!`, evaluated in log space.
pub fn poisson_pmf(k: u64, lambda: f64) -> Result<f64, ChannelError> {
    Ok(Poisson::new(lambda)?.pmf(k))
}

pub fn poisson_cdf(k: i64, lambda: f64) -> Result<f64, ChannelError> {
    Ok(Poisson::new(lambda)?.cdf(k))
}

pub fn sample_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64, ChannelError> {
    Ok(Poisson::new(lambda)?.sample(rng))
}
