//! Closed-form outage approximations and their exact small-case oracles.
//!
//! User 1 (weak user): the per-round SINR has support `[0, β_t)` with
//!
//! ```text
//! f_t(z) = p1 / (λ (p1 - z p2)²) · exp(-z / (λ (p1 - z p2)))
//! ```
//!
//! Its Laplace transform is approximated by Gauss-Chebyshev quadrature over
//! `[0, β_t)`, so the transform of the accumulated SINR becomes a finite sum
//! of exponentials over the index grid `(n_1, …, n_T) ∈ {1..N}^T`. Each term
//! is inverted with Gaver-Stehfest and the resulting density is integrated
//! over `(0, γ1)` with a second Chebyshev layer.
//!
//! User 2 (strong user): the outage is replaced by the accumulated SNR outage
//! `P(Σ p2_t h_t λ2 < γ2)` whose CDF is recovered from `M_X(-s) / s` by
//! Gaver-Stehfest.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PowerSchedule;
use crate::quadrature::{chebyshev_nodes, stehfest_invert, stehfest_weights};

/// Largest index grid evaluated by [`user1_outage_closed`].
pub const MAX_GRID_POINTS: u128 = 10_000_000;

const GRID_CHUNK: usize = 4096;
const RATE_MERGE_TOL: f64 = 1e-6;

/// Closed-form probability clamped to `[0, 1]`, with the unclamped value
/// kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageValue {
    pub value: f64,
    pub raw: f64,
}

impl OutageValue {
    fn from_raw(raw: f64) -> Self {
        Self { value: raw.clamp(0.0, 1.0), raw }
    }

    fn certain() -> Self {
        Self { value: 1.0, raw: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User1OutageInput {
    pub schedule: PowerSchedule,
    pub gain: f64,
    pub target_snr: f64,
    pub chebyshev_n: usize,
    pub stehfest_m: usize,
}

impl User1OutageInput {
    pub fn new(
        schedule: PowerSchedule,
        gain: f64,
        target_snr: f64,
        chebyshev_n: usize,
        stehfest_m: usize,
    ) -> Result<Self> {
        if schedule.p2().iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidParameter("user-1 outage needs p2_t > 0 in every round".into()));
        }
        if schedule.p1().iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidParameter("user-1 outage needs p1_t > 0 in every round".into()));
        }
        check_positive("gain", gain)?;
        check_positive("target SNR", target_snr)?;
        Ok(Self { schedule, gain, target_snr, chebyshev_n, stehfest_m })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User2OutageInput {
    pub p2: Vec<f64>,
    pub gain: f64,
    pub target_snr: f64,
    pub stehfest_m: usize,
}

impl User2OutageInput {
    pub fn new(p2: Vec<f64>, gain: f64, target_snr: f64, stehfest_m: usize) -> Result<Self> {
        if p2.is_empty() || p2.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("user-2 outage needs p2_t > 0 in every round".into()));
        }
        check_positive("gain", gain)?;
        check_positive("target SNR", target_snr)?;
        Ok(Self { p2, gain, target_snr, stehfest_m })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} {v} must be > 0")))
    }
}

/// Exact single-round user-1 outage `1 - exp(-γ1 / ((p1 - γ1 p2) λ1))`.
pub fn user1_outage_exact_single_round(p1: f64, p2: f64, gain: f64, target_snr: f64) -> f64 {
    if target_snr <= 0.0 {
        return 0.0;
    }
    let margin = p1 - target_snr * p2;
    if margin <= 0.0 {
        return 1.0;
    }
    -(-target_snr / (margin * gain)).exp_m1()
}

/// Per-round SINR density of the weak user on `[0, β)`.
fn sinr_density(z: f64, p1: f64, p2: f64, gain: f64) -> f64 {
    let margin = p1 - z * p2;
    if margin <= 0.0 {
        return 0.0;
    }
    let e = (-z / (gain * margin)).exp();
    if e == 0.0 {
        return 0.0;
    }
    p1 / (gain * margin * margin) * e
}

/// Closed-form user-1 outage after `T` rounds.
pub fn user1_outage_closed(input: &User1OutageInput) -> Result<OutageValue> {
    let schedule = &input.schedule;
    let rounds = schedule.rounds();
    let gamma = input.target_snr;
    let beta_sum: f64 = (0..rounds).map(|t| schedule.beta(t)).sum();
    if beta_sum <= gamma {
        return Ok(OutageValue::certain());
    }

    let n = input.chebyshev_n;
    let points = (n as u128).checked_pow(rounds as u32).unwrap_or(u128::MAX);
    if points > MAX_GRID_POINTS {
        return Err(Error::GridCapacity { points, limit: MAX_GRID_POINTS });
    }
    let cheb = chebyshev_nodes(n)?;
    let weights = stehfest_weights(input.stehfest_m)?;
    let w = weights.weights();
    let qw = cheb.weight();

    // Per-round quadrature of the SINR density: locations z_{t,n}, masses q_{t,n}.
    let per_round: Vec<(Vec<f64>, Vec<f64>)> = (0..rounds)
        .map(|t| {
            let (p1, p2) = (schedule.p1()[t], schedule.p2()[t]);
            let beta = schedule.beta(t);
            cheb.nodes()
                .iter()
                .map(|&a| {
                    let z = 0.5 * beta * (a + 1.0);
                    let q = 0.5 * beta * qw * (1.0 - a * a).sqrt() * sinr_density(z, p1, p2, input.gain);
                    (z, q)
                })
                .unzip()
        })
        .collect();

    // Outer layer over (0, γ1): density at ζ_k = γ1 (1 + a_k) / 2 is
    // (ln2 / ζ_k) Σ_m w_m 2^{-m c / ζ_k} for a grid term at location c.
    let outer: Vec<(f64, f64)> = cheb
        .nodes()
        .iter()
        .map(|&a| {
            let zeta = 0.5 * gamma * (1.0 + a);
            let rate = LN_2 / zeta;
            let coeff = 0.5 * gamma * qw * (1.0 - a * a).sqrt() * rate;
            (coeff, rate)
        })
        .collect();
    let kernel = |c: f64| -> f64 {
        outer
            .iter()
            .map(|&(coeff, rate)| {
                let base = (-rate * c).exp();
                let mut pow = 1.0;
                let mut acc = 0.0;
                for wm in w {
                    pow *= base;
                    acc += wm * pow;
                }
                coeff * acc
            })
            .sum()
    };

    let total = points as usize;
    let chunk_sums: Vec<f64> = (0..total.div_ceil(GRID_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * GRID_CHUNK;
            let end = (start + GRID_CHUNK).min(total);
            let mut acc = 0.0;
            for idx in start..end {
                let mut rem = idx;
                let mut mass = 1.0;
                let mut loc = 0.0;
                for (z, q) in &per_round {
                    let i = rem % n;
                    rem /= n;
                    mass *= q[i];
                    loc += z[i];
                }
                if mass != 0.0 {
                    acc += mass * kernel(loc);
                }
            }
            acc
        })
        .collect();
    Ok(OutageValue::from_raw(pairwise_sum(&chunk_sums)))
}

/// Order-independent reduction so the result does not depend on thread count.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Closed-form user-2 accumulated-SNR outage
/// `Σ_m (w_m / m) Π_t 1 / (1 + g_m p2_t)` with `g_m = m λ2 ln2 / γ2`.
pub fn user2_outage_closed(input: &User2OutageInput) -> Result<OutageValue> {
    let weights = stehfest_weights(input.stehfest_m)?;
    let raw = stehfest_invert(
        |s| {
            input
                .p2
                .iter()
                .map(|p| 1.0 / (1.0 + s * input.gain * p))
                .product::<f64>()
                / s
        },
        input.target_snr,
        &weights,
    )?;
    Ok(OutageValue::from_raw(raw))
}

/// Exact CDF of a sum of independent exponentials with the given rates.
///
/// Rates within `1e-6` relative of each other are merged into an Erlang
/// block; the CDF is then `1 + Σ_j Res_{s=-r_j} [e^{sx} / s Π_i (r_i/(s+r_i))^{k_i}]`.
pub fn hypoexp_cdf(rates: &[f64], x: f64) -> Result<f64> {
    if rates.is_empty() || rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("rates must be positive and finite".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let groups = merge_rates(rates);
    let mut survival = 0.0;
    for (j, &(rj, kj)) in groups.iter().enumerate() {
        let s0 = -rj;
        // n-th derivative (n >= 1) of log|H_j| at s0.
        let dlog = |order: usize| -> f64 {
            let mut acc = 1.0 / s0.powi(order as i32);
            for (i, &(ri, ki)) in groups.iter().enumerate() {
                if i != j {
                    acc += ki as f64 / (s0 + ri).powi(order as i32);
                }
            }
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial_f64(order - 1) * acc
        };
        let mut h0 = rj.powi(kj as i32) / s0;
        for (i, &(ri, ki)) in groups.iter().enumerate() {
            if i != j {
                h0 *= (ri / (ri - rj)).powi(ki as i32);
            }
        }
        let mut derivs = vec![h0];
        let log_derivs: Vec<f64> = (1..kj).map(dlog).collect();
        for l in 0..kj.saturating_sub(1) {
            let next: f64 = (0..=l)
                .map(|q| binomial(l, q) * log_derivs[q] * derivs[l - q])
                .sum();
            derivs.push(next);
        }
        let poly: f64 = (0..kj)
            .map(|l| binomial(kj - 1, l) * derivs[l] * x.powi((kj - 1 - l) as i32))
            .sum();
        survival -= (-rj * x).exp() * poly / factorial_f64(kj - 1);
    }
    Ok((1.0 - survival).clamp(0.0, 1.0))
}

fn merge_rates(rates: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for r in sorted {
        match groups.last_mut() {
            Some((first, count, sum)) if (r - *first) / *first < RATE_MERGE_TOL => {
                *count += 1;
                *sum += r;
            }
            _ => groups.push((r, 1, r)),
        }
    }
    groups.into_iter().map(|(_, k, sum)| (sum / k as f64, k)).collect()
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial_f64(n) / (factorial_f64(k) * factorial_f64(n - k))
}

/// Minimum `p1 / p2` for which the single-round user-2 outage equals the
/// plain SNR outage of `x2`: `(γ1 + γ1 γ2) / γ2`.
pub fn lemma1_threshold(gamma1: f64, gamma2: f64) -> f64 {
    (gamma1 + gamma1 * gamma2) / gamma2
}

/// Least-squares fit of `log10(outage)` against `log10(ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityEstimate {
    pub slope: f64,
    pub snr_range: (f64, f64),
    pub fit_residual: f64,
}

impl DiversityEstimate {
    /// Estimated diversity order (negated slope).
    pub fn order(&self) -> f64 {
        -self.slope
    }
}

pub fn diversity_slope<F>(mut outage_fn: F, rho_grid: &[f64]) -> Result<DiversityEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if rho_grid.len() < 4 {
        return Err(Error::DegenerateFit(format!("need >= 4 grid points, got {}", rho_grid.len())));
    }
    if rho_grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::DegenerateFit("grid values must be positive".into()));
    }
    let logs: Vec<f64> = rho_grid.iter().map(|r| r.log10()).collect();
    let step = logs[1] - logs[0];
    if step <= 0.0 || logs.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step.abs().max(1.0)) {
        return Err(Error::DegenerateFit("grid must be increasing and logarithmically spaced".into()));
    }
    let mut ys = Vec::with_capacity(logs.len());
    for &rho in rho_grid {
        let p = outage_fn(rho)?;
        if !(p > 1e-12 && p < 1.0) {
            return Err(Error::DegenerateFit(format!("outage {p:e} at rho = {rho} is outside (1e-12, 1)")));
        }
        ys.push(p.log10());
    }
    let n = logs.len() as f64;
    let mx = logs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = logs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = logs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    Ok(DiversityEstimate {
        slope,
        snr_range: (rho_grid[0], rho_grid[rho_grid.len() - 1]),
        fit_residual: (rss / n).sqrt(),
    })
}

/// `count` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn u1(p1: &[f64], p2: &[f64], gain: f64, gamma: f64) -> f64 {
        let s = PowerSchedule::new(p1.to_vec(), p2.to_vec()).unwrap();
        user1_outage_closed(&User1OutageInput::new(s, gain, gamma, 30, 10).unwrap())
            .unwrap()
            .value
    }

    fn u2(p2: &[f64], gain: f64, gamma: f64) -> f64 {
        user2_outage_closed(&User2OutageInput::new(p2.to_vec(), gain, gamma, 10).unwrap())
            .unwrap()
            .value
    }

    #[test]
    fn exact_single_round_examples() {
        assert_eq!(user1_outage_exact_single_round(1.0, 2.0, 1.0, 1.0), 1.0);
        assert_abs_diff_eq!(
            user1_outage_exact_single_round(2.0, 1.0, 1.0, 0.5),
            1.0 - (-1.0f64 / 3.0).exp(),
            epsilon = 1e-15
        );
        assert!(user1_outage_exact_single_round(2.0, 1.0, 1.0, 1e-12) < 1e-11);
        assert_eq!(user1_outage_exact_single_round(2.0, 1.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn user1_single_round_matches_exact() {
        let got = u1(&[2.0], &[1.0], 1.0, 0.5);
        assert_abs_diff_eq!(got, 0.283469, epsilon = 5e-2);
    }

    #[test]
    fn user1_support_bound_is_certain() {
        let s = PowerSchedule::new(vec![0.1, 0.05], vec![1.0, 1.0]).unwrap();
        let v = user1_outage_closed(&User1OutageInput::new(s, 0.5, 0.2, 30, 10).unwrap()).unwrap();
        assert_eq!(v, OutageValue { value: 1.0, raw: 1.0 });
    }

    #[test]
    fn user1_capacity_error() {
        let s = PowerSchedule::constant(3.0, 1.0, 5).unwrap();
        let err = user1_outage_closed(&User1OutageInput::new(s, 0.1, 0.2, 30, 10).unwrap()).unwrap_err();
        assert!(matches!(err, Error::GridCapacity { .. }));
        // Four rounds at N = 30 is within capacity.
        let s = PowerSchedule::constant(3.0, 1.0, 4).unwrap();
        assert!(user1_outage_closed(&User1OutageInput::new(s, 0.1, 0.2, 30, 10).unwrap()).is_ok());
    }

    #[test]
    fn user1_input_validation() {
        let s = PowerSchedule::new(vec![1.0], vec![0.0]).unwrap();
        assert!(User1OutageInput::new(s, 1.0, 1.0, 30, 10).is_err());
        assert!(User2OutageInput::new(vec![1.0], 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn user2_examples() {
        assert_abs_diff_eq!(u2(&[1.0], 1.0, 1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-2);
        assert_abs_diff_eq!(u2(&[1.0, 0.5], 1.0, 1.0), 0.399576, epsilon = 1e-2);
        assert!(u2(&[1.0, 2.0], 1.0, 1e-9) < 1e-6);
    }

    #[test]
    fn hypoexp_examples() {
        assert_abs_diff_eq!(hypoexp_cdf(&[2.0], 0.7).unwrap(), 1.0 - (-1.4f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(hypoexp_cdf(&[1.0, 2.0], 1.0).unwrap(), 0.399576, epsilon = 1e-6);
        assert_abs_diff_eq!(hypoexp_cdf(&[1.0, 1.0], 2.0).unwrap(), 0.593994, epsilon = 1e-6);
        assert_eq!(hypoexp_cdf(&[1.0], 0.0).unwrap(), 0.0);
        assert!(hypoexp_cdf(&[], 1.0).is_err());
    }

    #[test]
    fn hypoexp_mixed_blocks_match_distinct_limit() {
        // Nearly coincident rates (outside the merge tolerance) approach the merged result.
        let merged = hypoexp_cdf(&[1.0, 1.0, 3.0], 1.3).unwrap();
        let split = hypoexp_cdf(&[1.0, 1.0 + 1e-4, 3.0], 1.3).unwrap();
        assert_abs_diff_eq!(merged, split, epsilon = 1e-4);
    }

    #[test]
    fn hypoexp_equal_rates_is_erlang() {
        for k in 1..=6usize {
            for &x in &[0.3, 1.0, 2.5, 7.0] {
                let r = 1.7;
                let erlang = 1.0
                    - (-r * x as f64).exp()
                        * (0..k).map(|i| (r * x).powi(i as i32) / factorial_f64(i)).sum::<f64>();
                let got = hypoexp_cdf(&vec![r; k], x).unwrap();
                assert_abs_diff_eq!(got, erlang, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn lemma1_examples() {
        assert_abs_diff_eq!(lemma1_threshold(0.2, 1.0), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(lemma1_threshold(1.0, 1.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lemma1_threshold(0.2, 1e12), 0.2, epsilon = 1e-10);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let grid = log_grid(1e2, 1e4, 5);
        let est = diversity_slope(|r| Ok(r.powi(-2)), &grid).unwrap();
        assert_abs_diff_eq!(est.slope, -2.0, epsilon = 1e-12);
        assert!(est.fit_residual < 1e-12);
        assert_eq!(est.snr_range, (grid[0], grid[4]));
    }

    #[test]
    fn slope_errors() {
        assert!(diversity_slope(|r| Ok(1.0 / r), &[1.0, 10.0, 100.0]).is_err());
        assert!(diversity_slope(|r| Ok(1.0 / r), &[1.0, 10.0, 50.0, 1000.0]).is_err());
        let grid = log_grid(1e2, 1e4, 4);
        assert!(diversity_slope(|_| Ok(0.0), &grid).is_err());
    }

    #[test]
    fn user2_slope_three_rounds() {
        let grid = log_grid(1e2, 1e4, 6);
        let base = [0.1, 0.2, 0.05];
        let est = diversity_slope(
            |r| {
                let p: Vec<f64> = base.iter().map(|p| p * r).collect();
                Ok(user2_outage_closed(&User2OutageInput::new(p, 0.588, 1.0, 10)?)?.value)
            },
            &grid,
        )
        .unwrap();
        assert!((est.slope + 3.0).abs() <= 0.3, "slope {}", est.slope);
    }

    #[test]
    fn user1_slope_two_rounds() {
        let grid = log_grid(1e2, 1e4, 5);
        let est = diversity_slope(
            |r| Ok(u1(&[6.0 * r, 6.0 * r], &[2.0 * r, 2.0 * r], 10.0 / 101.0, 0.2)),
            &grid,
        )
        .unwrap();
        assert!((est.slope + 2.0).abs() <= 0.4, "slope {}", est.slope);
    }

    #[test]
    fn pairwise_sum_small() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn user2_matches_hypoexp(
            p2 in proptest::collection::vec(0.5..20.0f64, 1..=5),
            gain in 0.05..2.0f64,
            gamma in 0.1..5.0f64,
        ) {
            let rates: Vec<f64> = p2.iter().map(|p| 1.0 / (p * gain)).collect();
            let exact = hypoexp_cdf(&rates, gamma).unwrap();
            prop_assert!((u2(&p2, gain, gamma) - exact).abs() <= 1e-2);
        }

        #[test]
        fn user2_monotone_in_power(
            p2 in proptest::collection::vec(0.5..20.0f64, 1..=3),
            which in 0usize..3,
            bump in 0.01..5.0f64,
        ) {
            let mut q = p2.clone();
            let i = which % q.len();
            q[i] += bump;
            prop_assert!(u2(&q, 0.588, 1.0) <= u2(&p2, 0.588, 1.0) + 1e-9);
        }

        #[test]
        fn user1_monotone_in_power(
            p2 in proptest::collection::vec(0.5..10.0f64, 1..=2),
            beta in 0.5..3.0f64,
            which in 0usize..4,
            bump in 0.05..5.0f64,
        ) {
            let p1: Vec<f64> = p2.iter().map(|p| beta * p).collect();
            let base = u1(&p1, &p2, 10.0 / 101.0, 0.2);
            let (mut q1, mut q2) = (p1.clone(), p2.clone());
            let i = which % p2.len();
            // Scaling one round's pair keeps β and raises the SINR stochastically.
            q1[i] += beta * bump;
            q2[i] += bump;
            prop_assert!(u1(&q1, &q2, 10.0 / 101.0, 0.2) <= base + 1e-3);
        }

        // Close to the support edge (β/γ1 below ~2.5) or at very low SNR the
        // quadrature/Stehfest combination rings by up to ~0.4, so the check
        // covers the region where the approximation is usable.
        #[test]
        fn user1_close_to_exact_single_round(
            snr in 0.2..10.0f64,
            ratio in 2.5..6.0f64,
            gain in 0.05..1.0f64,
            gamma in 0.1..1.0f64,
        ) {
            let p2 = snr / gain;
            let p1 = ratio * gamma * p2;
            let closed = u1(&[p1], &[p2], gain, gamma);
            let exact = user1_outage_exact_single_round(p1, p2, gain, gamma);
            prop_assert!((closed - exact).abs() <= 5e-2, "{closed} vs {exact}");
        }

        #[test]
        fn monotone_in_target(
            p2 in proptest::collection::vec(0.5..10.0f64, 1..=2),
            g1 in 0.02..0.5f64,
            dg in 0.01..0.3f64,
        ) {
            // β = 2 per round keeps γ1 below β / 2.5 on the whole range.
            let p1: Vec<f64> = p2.iter().map(|p| 2.0 * p).collect();
            prop_assert!(u1(&p1, &p2, 0.1, g1) <= u1(&p1, &p2, 0.1, g1 + dg) + 1e-3);
            prop_assert!(u2(&p2, 0.5, g1) <= u2(&p2, 0.5, g1 + dg) + 1e-9);
        }
    }
}
