//! Collective resonance fluorescence of a small atomic ensemble in a standing
//! wave, and sub-wavelength localization schemes built on its intensity dip.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod collective;
pub mod dicke;
pub mod error;
pub mod export;
pub mod localization;
pub mod profile;
pub mod special;
pub mod steady_state;

pub use collective::{EnsembleParams, PairGeometry};
pub use error::{Error, Result};
pub use profile::{dip_feature, evaluate_profile, DipFeature, IntensityProfile, WidthAxis};
pub use steady_state::{intensity, SteadyStateSeries};
