//! Simulation laboratory for physical-layer authentication through a
//! reconfigurable intelligent surface (RIS).
//!
//! A receiver (Bob) decides whether a transmission came from the enrolled
//! transmitter (Alice) or an impostor (Eve) by thresholding the distance
//! between an observed channel feature and Alice's stored fingerprint. Two
//! features are supported: the pathloss through a single RIS element, and
//! the cascaded channel impulse response (CIR), split into magnitude and
//! phase tests.
//!
//! - [`specfun`]: Gaussian tail, folded normal and Rayleigh primitives.
//! - [`scenario`], [`channel`]: geometry, pathloss models, channel draws.
//! - [`auth`]: statistics, decision rule, closed-form error probabilities.
//! - [`mc`]: deterministic parallel Monte-Carlo estimates and ROC curves.
//! - [`optim`]: gradient grid search and discrete phase-matrix search.
//! - [`validate`]: the analytical-vs-simulation cross-check suite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auth;
pub mod channel;
pub mod error;
pub mod mc;
pub mod optim;
pub mod scenario;
pub mod specfun;
pub mod validate;

pub use auth::{
    decide, pfa_cir_magnitude, pfa_pathloss, pmd_pathloss, rayleigh_scale, threshold_for_pfa,
    threshold_for_pfa_cir_magnitude, ts_cir_magnitude, ts_cir_phase, ts_pathloss, CirFingerprint, Decision,
    Fingerprint, PathlossFingerprint, PhaseWrap, Verdict,
};
pub use channel::{ChannelRealization, Enrollment, PhaseProfile};
pub use error::{Error, Result};
pub use mc::{
    collect_statistics, empirical_distribution, roc_sweep, run_trials, ErrorEstimate, Fading, Feature, Hypothesis,
    Link, RocCurve, RocPoint, TrialPlan, TrialStatistics,
};
pub use optim::{
    default_gradient_grid, near_zero_minima, optimize_gradient, optimize_phase_matrix, OptResult, PhaseSearch,
    Strategy, TraceEntry,
};
pub use scenario::{Scenario, ScenarioParams, Vec3};
