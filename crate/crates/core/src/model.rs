//! Physical-layer model of the two-user downlink.
//!
//! User 1 is the weak (far) user that decodes its own message treating the
//! user-2 signal as noise. User 2 is the strong (near) user that first
//! removes the user-1 message by SIC. Fading power `h` is unit-mean
//! exponential (Rayleigh amplitude) and `λ` is the normalized average gain.

use crate::error::{Error, Result};

/// Distance, path loss and noise of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub distance: f64,
    pub path_loss_exponent: f64,
    pub noise_power: f64,
}

impl LinkParams {
    pub fn new(distance: f64, path_loss_exponent: f64, noise_power: f64) -> Result<Self> {
        if !(distance >= 0.0 && distance.is_finite()) {
            return Err(Error::InvalidParameter(format!("distance {distance} must be >= 0")));
        }
        if !(path_loss_exponent > 0.0 && path_loss_exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "path loss exponent {path_loss_exponent} must be > 0"
            )));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise power {noise_power} must be > 0")));
        }
        Ok(Self { distance, path_loss_exponent, noise_power })
    }

    /// `λ = 1 / ((1 + d^α) σ²)`.
    pub fn gain(&self) -> f64 {
        normalized_gain(self)
    }
}

/// Target SNR and maximum tolerable outage of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosSpec {
    pub target_snr: f64,
    pub max_outage: f64,
}

impl QosSpec {
    pub fn new(target_snr: f64, max_outage: f64) -> Result<Self> {
        if !(target_snr > 0.0 && target_snr.is_finite()) {
            return Err(Error::InvalidParameter(format!("target SNR {target_snr} must be > 0")));
        }
        if !(max_outage > 0.0 && max_outage < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "max outage {max_outage} must lie in (0, 1)"
            )));
        }
        Ok(Self { target_snr, max_outage })
    }
}

/// Per-round power pairs `(p1_t, p2_t)` for `T` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSchedule {
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl PowerSchedule {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        if p1.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one round".into()));
        }
        if p1.len() != p2.len() {
            return Err(Error::LengthMismatch { expected: p1.len(), actual: p2.len() });
        }
        if let Some(p) = p1.iter().chain(&p2).find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(format!("power {p} must be finite and >= 0")));
        }
        Ok(Self { p1, p2 })
    }

    /// The same pair repeated for `rounds` rounds.
    pub fn constant(p1: f64, p2: f64, rounds: usize) -> Result<Self> {
        Self::new(vec![p1; rounds], vec![p2; rounds])
    }

    pub fn rounds(&self) -> usize {
        self.p1.len()
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn p2(&self) -> &[f64] {
        &self.p2
    }

    /// Power ratio `p1_t / p2_t`; `+∞` when `p2_t = 0`.
    pub fn beta(&self, t: usize) -> f64 {
        if self.p2[t] > 0.0 {
            self.p1[t] / self.p2[t]
        } else {
            f64::INFINITY
        }
    }

    /// Total power spent in round `t`.
    pub fn round_power(&self, t: usize) -> f64 {
        self.p1[t] + self.p2[t]
    }

    /// First `rounds` rounds of the schedule.
    pub fn truncated(&self, rounds: usize) -> Result<Self> {
        if rounds == 0 || rounds > self.rounds() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate a {}-round schedule to {rounds} rounds",
                self.rounds()
            )));
        }
        Self::new(self.p1[..rounds].to_vec(), self.p2[..rounds].to_vec())
    }

    /// All powers multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.p1.iter().map(|p| p * factor).collect(),
            self.p2.iter().map(|p| p * factor).collect(),
        )
    }

    /// Checks `p1_t + p2_t <= p_max` for every round.
    pub fn check_cap(&self, p_max: f64, tol: f64) -> Result<()> {
        for t in 0..self.rounds() {
            let total = self.round_power(t);
            if total > p_max + tol {
                return Err(Error::InvalidParameter(format!(
                    "round {} uses {total} W, above the cap of {p_max} W",
                    t + 1
                )));
            }
        }
        Ok(())
    }
}

/// Solver and simulation settings shared by the experiment runners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub p_max: f64,
    pub sca_tolerance: f64,
    pub mc_trials: u64,
    pub rng_seed: u64,
    pub chebyshev_n: usize,
    pub stehfest_m: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            p_max: 40.0,
            sca_tolerance: 1e-4,
            mc_trials: 1_000_000,
            rng_seed: 0,
            chebyshev_n: 30,
            stehfest_m: 10,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("p_max {} must be > 0", self.p_max)));
        }
        if !(self.sca_tolerance > 0.0) {
            return Err(Error::InvalidParameter("sca_tolerance must be > 0".into()));
        }
        if self.mc_trials == 0 {
            return Err(Error::InvalidParameter("mc_trials must be > 0".into()));
        }
        if self.chebyshev_n == 0 {
            return Err(Error::InvalidParameter("chebyshev_n must be >= 1".into()));
        }
        if self.stehfest_m < 2 || self.stehfest_m % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "stehfest_m {} must be even and >= 2",
                self.stehfest_m
            )));
        }
        Ok(())
    }
}

/// `λ = 1 / ((1 + d^α) σ²)`.
pub fn normalized_gain(link: &LinkParams) -> f64 {
    1.0 / ((1.0 + link.distance.powf(link.path_loss_exponent)) * link.noise_power)
}

/// SINR of the weak user decoding `x1` with `x2` as interference.
pub fn sinr_weak(p1: f64, p2: f64, h: f64, gain: f64) -> f64 {
    let g = h * gain;
    p1 * g / (p2 * g + 1.0)
}

/// SINR of `x1` and SNR of `x2` at the strong user (after SIC).
pub fn sinr_strong(p1: f64, p2: f64, h: f64, gain: f64) -> (f64, f64) {
    let g = h * gain;
    (p1 * g / (p2 * g + 1.0), p2 * g)
}

/// Probability that round `t` is transmitted given the outage of both users
/// after round `t - 1`: `1 - (1 - P1)(1 - P2)`.
pub fn retransmission_prob(out1_prev: f64, out2_prev: f64) -> f64 {
    out1_prev + out2_prev - out1_prev * out2_prev
}

/// Average transmit power `Σ_t (p1_t + p2_t) · P̂_t`.
///
/// `retrans[0]` must be 1: the first round is always sent.
pub fn average_power(schedule: &PowerSchedule, retrans: &[f64]) -> Result<f64> {
    if retrans.len() != schedule.rounds() {
        return Err(Error::LengthMismatch { expected: schedule.rounds(), actual: retrans.len() });
    }
    if (retrans[0] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "first-round retransmission probability must be 1, got {}",
            retrans[0]
        )));
    }
    Ok((0..schedule.rounds()).map(|t| schedule.round_power(t) * retrans[t]).sum())
}
