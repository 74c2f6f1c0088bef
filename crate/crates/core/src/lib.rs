//! Planning and verification toolkit for a two-user HARQ-CC NOMA downlink.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds link parameters, SINR expressions, retransmission
//!   probabilities and the average-power accounting.
//! * [`quadrature`] provides Gauss-Chebyshev nodes and Gaver-Stehfest weights.
//! * [`outage`] evaluates the closed-form outage approximations for both
//!   users, an exact hypoexponential oracle and diversity-slope fits.
//! * [`monte_carlo`] is the seeded simulation ground truth.
//! * [`convex`] is a small log-barrier solver for exponential-sum programs.
//! * [`sca`] drives the successive convex approximation of the power
//!   minimisation problem, an exhaustive grid oracle and round minimisation.
//! * [`pairing`] pairs cell-center and cell-edge users by swap matching.
//!
//! All powers are linear Watts and all SNR targets are linear ratios.

pub mod convex;
pub mod error;
pub mod model;
pub mod monte_carlo;
pub mod outage;
pub mod pairing;
pub mod quadrature;
pub mod sca;

pub use error::{Error, Result};
pub use model::{LinkParams, PowerSchedule, QosSpec, SystemConfig};
