//! Two-qubit dephasing under correlated environments.
//!
//! Every environment model here is diagonal in a fixed basis, so the
//! dynamics reduces to four scalar decoherence functions
//! (`kappa1`, `kappa2`, `kappa12`, `lambda12`) that multiply the coherences
//! of a two-qubit density matrix. The crate evaluates those functions for
//! frequency-continuum baths ([`freqkernel`]), Ohmic boson baths
//! ([`bosonbath`]) and thermal spin-star baths ([`spinstar`]), and measures
//! information backflow on the resulting traces ([`analysis`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bosonbath;
pub mod cli;
pub mod freqkernel;
pub mod map;
pub mod quad;
pub mod spinstar;

pub use analysis::{BackflowReport, TimeSeries};
pub use map::{DephasingFactors, QubitState, TwoQubitDensityMatrix, TwoQubitPureState};
