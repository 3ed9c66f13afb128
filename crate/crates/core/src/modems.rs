//! Symbol alphabets, emission maps and symbol-by-symbol decoders for
//! concentration shift keying (CSK), molecule shift keying (MOSK) and
//! molecule-concentration shift keying (MOCSK).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::analysis;
use crate::channel::{ChannelParams, Poisson};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModemError {
    #[error("alphabet size must be a power of two >= 2 (got {0})")]
    Levels(usize),
    #[error("diffusion rates must be finite and >= 0")]
    Rate,
    #[error("CSK/MOCSK rates must be nondecreasing in the symbol index")]
    UnorderedRates,
    #[error("symbol {value} out of range for a {levels}-ary alphabet")]
    SymbolRange { value: usize, levels: usize },
    #[error("threshold list must be strictly increasing with {expected} entries")]
    ThresholdShape { expected: usize },
    #[error("threshold set does not match the {0} scheme")]
    ThresholdFamily(Family),
    #[error("expected counts for {expected} molecule types, got {got}")]
    CountShape { expected: usize, got: usize },
    #[error("received rates are not separable; no decoder can tell the symbols apart")]
    NonIdentifiable,
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Csk,
    Mosk,
    Mocsk,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Csk => "CSK",
            Family::Mosk => "MOSK",
            Family::Mocsk => "MOCSK",
        })
    }
}

/// A transmitted or decoded symbol of an `levels`-ary alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(usize);

impl Symbol {
    pub fn new(value: usize, levels: usize) -> Result<Self, ModemError> {
        if value >= levels {
            return Err(ModemError::SymbolRange { value, levels });
        }
        Ok(Self(value))
    }

    pub fn value(self) -> usize {
        self.0
    }

    pub(crate) fn from_index(value: usize) -> Self {
        Self(value)
    }
}

/// Modulation family, alphabet size and per-symbol diffusion rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    family: Family,
    levels: usize,
    rates: Vec<f64>,
}

impl SchemeSpec {
    /// Scheme at a given average diffusion rate per bit.
    ///
    /// CSK and MOCSK use the equally spaced alphabet `0, d, 2d, .., (L-1)d`.
    /// MOSK emits the same rate for every symbol, on the symbol's own type.
    pub fn new(family: Family, levels: usize, power_per_bit: f64) -> Result<Self, ModemError> {
        check_levels(levels)?;
        if !(power_per_bit.is_finite() && power_per_bit >= 0.0) {
            return Err(ModemError::Rate);
        }
        let bits = log2_levels(levels);
        let rates = match family {
            Family::Csk | Family::Mocsk => {
                let step = 2.0 * power_per_bit * bits / (levels - 1) as f64;
                (0..levels).map(|s| s as f64 * step).collect()
            }
            Family::Mosk => vec![power_per_bit * bits; levels],
        };
        Self::with_rates(family, rates)
    }

    pub fn with_rates(family: Family, rates: Vec<f64>) -> Result<Self, ModemError> {
        let levels = rates.len();
        check_levels(levels)?;
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(ModemError::Rate);
        }
        if family != Family::Mosk && rates.windows(2).any(|w| w[1] < w[0]) {
            return Err(ModemError::UnorderedRates);
        }
        Ok(Self { family, levels, rates })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, symbol: Symbol) -> f64 {
        self.rates[symbol.value()]
    }

    pub fn num_molecule_types(&self) -> usize {
        match self.family {
            Family::Csk => 1,
            Family::Mocsk => 2,
            Family::Mosk => self.levels,
        }
    }

    pub fn bits_per_symbol(&self) -> f64 {
        log2_levels(self.levels)
    }

    pub fn avg_power_per_bit(&self) -> f64 {
        let mean = self.rates.iter().sum::<f64>() / self.levels as f64;
        mean / self.bits_per_symbol()
    }

    pub fn symbol(&self, value: usize) -> Result<Symbol, ModemError> {
        Symbol::new(value, self.levels)
    }

    /// Short name such as `BCSK`, `QMOSK` or `8-MOCSK`.
    pub fn label(&self) -> alloc::string::String {
        use alloc::format;
        match self.levels {
            2 => format!("B{}", self.family),
            4 => format!("Q{}", self.family),
            l => format!("{l}-{}", self.family),
        }
    }

    /// Molecule type carrying the transmission in `slot_index` (zero-based).
    ///
    /// MOCSK alternates: slots 0, 2, 4, .. (the first, third, .. time
    /// slots) use type 0, the others type 1.
    pub fn active_type(&self, symbol: Symbol, slot_index: u64) -> usize {
        match self.family {
            Family::Csk => 0,
            Family::Mosk => symbol.value(),
            Family::Mocsk => (slot_index % 2) as usize,
        }
    }

    /// Diffusion rate of every molecule type for `symbol` sent in `slot_index`.
    pub fn emission_for(&self, symbol: Symbol, slot_index: u64) -> Result<Vec<f64>, ModemError> {
        let symbol = self.symbol(symbol.value())?;
        let mut out = vec![0.0; self.num_molecule_types()];
        out[self.active_type(symbol, slot_index)] = self.rate(symbol);
        Ok(out)
    }
}

fn check_levels(levels: usize) -> Result<(), ModemError> {
    if levels >= 2 && levels.is_power_of_two() {
        Ok(())
    } else {
        Err(ModemError::Levels(levels))
    }
}

fn log2_levels(levels: usize) -> f64 {
    levels.trailing_zeros() as f64
}

/// Decision thresholds. A count `y` maps to the number of thresholds `t`
/// with `y >= t`, so a count equal to a threshold decodes upward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThresholdSet {
    /// One list per previously decoded symbol.
    Csk(Vec<Vec<u64>>),
    /// A type "fires" when its count exceeds this value.
    Mosk(u64),
    Mocsk(Vec<u64>),
}

impl ThresholdSet {
    pub fn family(&self) -> Family {
        match self {
            ThresholdSet::Csk(_) => Family::Csk,
            ThresholdSet::Mosk(_) => Family::Mosk,
            ThresholdSet::Mocsk(_) => Family::Mocsk,
        }
    }

    pub fn validate(&self, spec: &SchemeSpec) -> Result<(), ModemError> {
        if self.family() != spec.family() {
            return Err(ModemError::ThresholdFamily(spec.family()));
        }
        let expected = spec.levels() - 1;
        let check = |row: &[u64]| {
            if row.len() == expected && row.windows(2).all(|w| w[0] < w[1]) {
                Ok(())
            } else {
                Err(ModemError::ThresholdShape { expected })
            }
        };
        match self {
            ThresholdSet::Csk(rows) => {
                if rows.len() != spec.levels() {
                    return Err(ModemError::ThresholdShape { expected });
                }
                rows.iter().try_for_each(|r| check(r))
            }
            ThresholdSet::Mosk(_) => Ok(()),
            ThresholdSet::Mocsk(row) => check(row),
        }
    }

    /// Threshold list used after `prev_decoded`, for CSK and MOCSK.
    pub fn row(&self, prev_decoded: Symbol) -> Option<&[u64]> {
        match self {
            ThresholdSet::Csk(rows) => rows.get(prev_decoded.value()).map(Vec::as_slice),
            ThresholdSet::Mocsk(row) => Some(row),
            ThresholdSet::Mosk(_) => None,
        }
    }
}

impl fmt::Display for ThresholdSet {
    /// `31;52` for a list, `0:31;52|1:33;55` for CSK rows, the bare value for MOSK.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, row: &[u64]) -> fmt::Result {
            for (i, t) in row.iter().enumerate() {
                if i > 0 {
                    f.write_str(";")?;
                }
                write!(f, "{t}")?;
            }
            Ok(())
        }
        match self {
            ThresholdSet::Mosk(t) => write!(f, "{t}"),
            ThresholdSet::Mocsk(row) => list(f, row),
            ThresholdSet::Csk(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{i}:")?;
                    list(f, row)?;
                }
                Ok(())
            }
        }
    }
}

/// Index of the decision interval containing `count`.
pub fn interval_index(thresholds: &[u64], count: u64) -> usize {
    thresholds.iter().take_while(|&&t| count >= t).count()
}

/// Decision interval `[lo, hi)` of `symbol`; `hi = None` is unbounded.
pub fn decision_interval(thresholds: &[u64], symbol: usize) -> (u64, Option<u64>) {
    let lo = if symbol == 0 { 0 } else { thresholds[symbol - 1] };
    (lo, thresholds.get(symbol).copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub symbol: Symbol,
    /// MOSK only: no type, or more than one type, crossed the threshold.
    pub error_flagged: bool,
}

/// Decode one slot from the per-type molecule counts.
///
/// CSK picks its threshold list from `prev_decoded`; MOCSK reads only the
/// type active in `slot_index` and ignores `prev_decoded`. An ambiguous MOSK
/// slot is flagged and reports the type with the largest count (lowest index
/// on ties).
pub fn decode(
    spec: &SchemeSpec,
    thresholds: &ThresholdSet,
    counts: &[u64],
    prev_decoded: Symbol,
    slot_index: u64,
) -> Result<Decision, ModemError> {
    let expected = spec.num_molecule_types();
    if counts.len() != expected {
        return Err(ModemError::CountShape { expected, got: counts.len() });
    }
    let unflagged = |v| Decision { symbol: Symbol(v), error_flagged: false };
    match (spec.family(), thresholds) {
        (Family::Csk, ThresholdSet::Csk(rows)) => {
            let row = rows
                .get(prev_decoded.value())
                .ok_or(ModemError::SymbolRange { value: prev_decoded.value(), levels: spec.levels() })?;
            Ok(unflagged(interval_index(row, counts[0])))
        }
        (Family::Mocsk, ThresholdSet::Mocsk(row)) => {
            let ty = (slot_index % 2) as usize;
            Ok(unflagged(interval_index(row, counts[ty])))
        }
        (Family::Mosk, ThresholdSet::Mosk(tau)) => {
            let mut fired = counts.iter().enumerate().filter(|(_, &c)| c > *tau);
            match (fired.next(), fired.next()) {
                (Some((ty, _)), None) => Ok(unflagged(ty)),
                _ => {
                    let mut best = 0;
                    for (ty, &c) in counts.iter().enumerate() {
                        if c > counts[best] {
                            best = ty;
                        }
                    }
                    Ok(Decision { symbol: Symbol(best), error_flagged: true })
                }
            }
        }
        _ => Err(ModemError::ThresholdFamily(spec.family())),
    }
}

/// Smallest count at which Poisson(`hi`) is at least as likely as Poisson(`lo`).
pub fn map_boundary(lo: f64, hi: f64) -> u64 {
    debug_assert!(hi > lo && lo >= 0.0);
    if lo == 0.0 {
        return 1;
    }
    let log_ratio = libm::log(hi / lo);
    let diff = hi - lo;
    let favors_hi = |k: u64| k as f64 * log_ratio - diff >= 0.0;
    let mut k = libm::ceil(diff / log_ratio).max(0.0) as u64;
    while k > 0 && favors_hi(k - 1) {
        k -= 1;
    }
    while !favors_hi(k) {
        k += 1;
    }
    k
}

/// Integer thresholds minimising the analytic average error probability.
///
/// CSK and MOCSK start from the pairwise MAP boundaries of adjacent symbols
/// (for CSK, assuming the previous decision was right); when two boundaries
/// collide, as they do at low power, the seed is instead the best strictly
/// increasing list for those laws. The seed is then refined one threshold at
/// a time by +-1 steps until no single step helps. MOSK scans
/// every integer threshold up to `lambda_max + 10 sqrt(lambda_max)`.
pub fn design_thresholds(spec: &SchemeSpec, params: &ChannelParams) -> Result<ThresholdSet, ModemError> {
    match spec.family() {
        Family::Mocsk => {
            let lambdas: Vec<f64> = spec.rates().iter().map(|r| params.p1() * r + params.lambda0()).collect();
            let seed = ThresholdSet::Mocsk(map_seed(&lambdas)?);
            refine(spec, params, seed)
        }
        Family::Csk => {
            let mut rows = Vec::with_capacity(spec.levels());
            for prev in spec.rates() {
                let lambdas: Vec<f64> =
                    spec.rates().iter().map(|r| params.p1() * r + params.p2() * prev + params.lambda0()).collect();
                rows.push(map_seed(&lambdas)?);
            }
            refine(spec, params, ThresholdSet::Csk(rows))
        }
        Family::Mosk => {
            let r_max = spec.rates().iter().copied().fold(0.0, f64::max);
            if params.p1() * r_max <= 0.0 {
                return Err(ModemError::NonIdentifiable);
            }
            let lambda_max = (params.p1() + params.p2()) * r_max + params.lambda0();
            let upper = libm::ceil(lambda_max + 10.0 * libm::sqrt(lambda_max)) as u64;
            let mut best = (f64::INFINITY, 0);
            for tau in 0..=upper {
                let pe = analysis::mosk_error_prob(spec, &ThresholdSet::Mosk(tau), params)?.avg_pe;
                if pe < best.0 {
                    best = (pe, tau);
                }
            }
            Ok(ThresholdSet::Mosk(best.1))
        }
    }
}

/// Pairwise MAP boundaries, or, where adjacent boundaries collide, the
/// strictly increasing list with the least error for the given laws.
fn map_seed(lambdas: &[f64]) -> Result<Vec<u64>, ModemError> {
    let mut out: Vec<u64> = Vec::with_capacity(lambdas.len() - 1);
    for w in lambdas.windows(2) {
        if w[1].partial_cmp(&w[0]) != Some(core::cmp::Ordering::Greater) {
            return Err(ModemError::NonIdentifiable);
        }
        out.push(map_boundary(w[0], w[1]));
    }
    if out.windows(2).all(|w| w[0] < w[1]) {
        Ok(out)
    } else {
        Ok(ordered_boundaries(lambdas))
    }
}

/// Strictly increasing thresholds minimising the error of an interval
/// detector over `Poisson(lambdas[i])`, equiprobable symbols.
///
/// The error splits into one term per boundary,
/// `L Pe = sum_j P_{j-1}(Y >= t_j) + P_j(Y < t_j)`, so the ordered minimum
/// follows from a prefix-minimum recursion over candidate thresholds.
fn ordered_boundaries(lambdas: &[f64]) -> Vec<u64> {
    let laws: Vec<Poisson> = lambdas.iter().map(|&l| law(l)).collect();
    let m = laws.len() - 1;
    let top = lambdas.iter().copied().fold(0.0, f64::max);
    let span = libm::ceil(top + 10.0 * libm::sqrt(top)) as usize + m + 1;
    let term = |j: usize, t: usize| laws[j - 1].sf(t as i64 - 1) + laws[j].cdf(t as i64 - 1);

    // cost[j][t]: least error of boundaries 1..=j with t_j = t; from[j][t]
    // the best t_{j-1} < t behind it.
    let mut cost = vec![vec![f64::INFINITY; span + 1]; m + 1];
    let mut from = vec![vec![0usize; span + 1]; m + 1];
    for (t, c) in cost[1].iter_mut().enumerate() {
        *c = term(1, t);
    }
    for j in 2..=m {
        let (mut best, mut arg) = (f64::INFINITY, 0);
        for t in 1..=span {
            if cost[j - 1][t - 1] < best {
                best = cost[j - 1][t - 1];
                arg = t - 1;
            }
            if best.is_finite() {
                cost[j][t] = best + term(j, t);
                from[j][t] = arg;
            }
        }
    }
    let mut t = (0..=span).fold(0, |a, t| if cost[m][t] < cost[m][a] { t } else { a });
    let mut out = vec![0u64; m];
    for j in (1..=m).rev() {
        out[j - 1] = t as u64;
        t = from[j][t];
    }
    out
}

/// Relative gain a neighbouring threshold set must offer to be taken.
pub const DESCENT_RTOL: f64 = 1e-12;

fn refine(spec: &SchemeSpec, params: &ChannelParams, seed: ThresholdSet) -> Result<ThresholdSet, ModemError> {
    let mut best = seed;
    let mut best_pe = analysis::error_prob(spec, &best, params)?.avg_pe;
    loop {
        let mut improved = false;
        for candidate in neighbours(&best) {
            let pe = analysis::error_prob(spec, &candidate, params)?.avg_pe;
            if pe < best_pe - best_pe * DESCENT_RTOL {
                best = candidate;
                best_pe = pe;
                improved = true;
                break;
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}

/// Valid threshold sets differing from `set` by +-1 in exactly one threshold.
pub fn neighbours(set: &ThresholdSet) -> Vec<ThresholdSet> {
    fn row_neighbours(row: &[u64]) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        for i in 0..row.len() {
            for up in [false, true] {
                let t = row[i];
                let moved = if up {
                    t + 1
                } else if t == 0 {
                    continue;
                } else {
                    t - 1
                };
                let below_ok = i == 0 || row[i - 1] < moved;
                let above_ok = i + 1 == row.len() || moved < row[i + 1];
                if below_ok && above_ok {
                    let mut r = row.to_vec();
                    r[i] = moved;
                    out.push(r);
                }
            }
        }
        out
    }
    match set {
        ThresholdSet::Mosk(t) => {
            let mut out = vec![ThresholdSet::Mosk(t + 1)];
            if *t > 0 {
                out.push(ThresholdSet::Mosk(t - 1));
            }
            out
        }
        ThresholdSet::Mocsk(row) => row_neighbours(row).into_iter().map(ThresholdSet::Mocsk).collect(),
        ThresholdSet::Csk(rows) => {
            let mut out = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                for r in row_neighbours(row) {
                    let mut all = rows.clone();
                    all[i] = r;
                    out.push(ThresholdSet::Csk(all));
                }
            }
            out
        }
    }
}

/// Receive-side Poisson law for a count with the given composed rate.
pub(crate) fn law(rate: f64) -> Poisson {
    Poisson::new(rate.max(0.0)).expect("composed rates are finite and nonnegative")
}
