//! Testers for the function classes behind bell shape: sign changes,
//! complete and absolute monotonicity, total positivity, Pólya frequency
//! functions and Rogers functions.

pub mod bell;
pub mod monotone;
pub mod polya;
pub mod positivity;
pub mod rogers;
pub mod sign;

pub use bell::{bell_samples, check_bell_shape, BellOptions, BellVerdict, ShapeReport};
pub use monotone::{check_amcm, check_complete_monotone, geometric_grid, AmCmVerdict, MonotoneVerdict};
pub use polya::PolyaFrequencyForm;
pub use positivity::{check_total_positivity, check_total_positivity_sets, random_point_sets, TpVerdict};
pub use rogers::{
    check_resolvent_amcm, check_rogers, psi_at_zero, resolvent_density, rogers_from_levy, LevyDensity, LevyTriplet,
    ResolventOptions, ResolventVerdict, RogersVerdict,
};
pub use sign::{count_sign_changes, sign_changes, SignChanges, SIGN_TOL};
