//! Poisson model of diffusion-based molecular communication.
//!
//! * [`channel`]: Poisson rate composition, pmf/cdf and sampling.
//! * [`modems`]: CSK, MOSK and MOCSK alphabets, decoders and threshold design.
//! * [`analysis`]: exact average symbol error probabilities.
//! * [`montecarlo`]: slot-level simulation used to cross-check the analysis.
//! * [`bounds`]: Fano lower bound on the error probability of any
//!   symbol-by-symbol scheme.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod bounds;
pub mod channel;
pub mod modems;
pub mod montecarlo;

pub use analysis::{error_prob, ErrorReport, Method};
pub use bounds::{pe_lower_bound, BoundParams, BoundResult, MuUnits};
pub use channel::{ChannelParams, EmissionPair, Poisson};
pub use modems::{decode, design_thresholds, Family, SchemeSpec, Symbol, ThresholdSet};
pub use montecarlo::{simulate, SimConfig};
