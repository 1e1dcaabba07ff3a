//! Four-state discrete-modulation continuous-variable QKD toolkit.
//!
//! The library covers the full post-processing stack of the quaternary
//! coherent-state protocol with homodyne detection and reverse
//! reconciliation:
//!
//! - [`state_algebra`]: exact spectral decomposition of the four-state
//!   mixture, its purification, and the quadrature correlation entering
//!   the covariance matrix;
//! - [`security`]: BIAWGN mutual information, the Holevo bound from the
//!   covariance matrix, secret key rates, amplitude optimisation, and
//!   rate-versus-distance curves;
//! - [`sim`]: Monte-Carlo simulation of the prepare-and-measure rounds
//!   (quadrature-level Gaussian channel) with parameter estimation;
//! - [`reconcile`]: low-SNR reverse reconciliation built from a repetition
//!   code concatenated with an LDPC code, including syndrome
//!   belief-propagation decoding and efficiency measurement;
//! - [`protocol`]: a two-party framed session harness (loopback or TCP)
//!   that runs the classical protocol end to end and distills identical
//!   keys on both endpoints.
//!
//! The analytical core is generic over the floating-point scalar via
//! [`scalar::Real`]; the aliases below fix `f64` for everyday use.

pub mod reconcile;
pub mod protocol;
pub mod scalar;
pub mod security;
pub mod sim;
pub mod state_algebra;
pub mod util;

pub use scalar::Real;

/// `f64` modulation parameters.
pub type ModulationParams64 = state_algebra::ModulationParams<f64>;
/// `f64` spectral decomposition of the four-state mixture.
pub type SpectralData64 = state_algebra::SpectralData<f64>;
/// `f64` correlation pair (Z, Z_EPR).
pub type Correlations64 = state_algebra::Correlations<f64>;
/// `f64` two-mode covariance matrix.
pub type CovarianceMatrix64 = state_algebra::CovarianceMatrix<f64>;
/// `f64` channel parameters.
pub type ChannelParams64 = security::ChannelParams<f64>;
/// `f64` key-rate report.
pub type KeyRateReport64 = security::KeyRateReport<f64>;
