//! Finite-key secure key rates for decoy-state measurement-device-independent
//! QKD with an arbitrary number of decoy intensities per basis.

pub mod channel;
pub mod decoy_algebra;
pub mod error;
pub mod finite_key;
pub mod key_rate;
mod numeric;
pub mod optimizer;
pub mod oracle;
pub mod yield_bounds;

pub use channel::ChannelParams;
pub use decoy_algebra::{Basis, CoefficientSet, IntensityLadder};
pub use error::{Error, Result};
pub use finite_key::{ErrorBoundResult, FiniteKeyContext, Method};
pub use key_rate::{
    evaluate, FiniteKeySettings, KeyRateReport, ProtocolParams, RateForm, SampleSize,
    SecurityBudget,
};
pub use yield_bounds::{GainStatistics, YieldBounds};
