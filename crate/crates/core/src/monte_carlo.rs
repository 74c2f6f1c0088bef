//! Seeded Monte Carlo estimators used as ground truth for the closed forms.
//!
//! Trials are split into fixed-size blocks. Block `i` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, so a block's
//! samples do not depend on which thread runs it. Block moments are
//! merged in block order, which makes every estimate bit-identical across
//! thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{sinr_strong, sinr_weak, PowerSchedule};

/// Trials per RNG stream.
pub const BLOCK_TRIALS: u64 = 1 << 16;

/// Smallest accepted trial count.
pub const MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl McResult {
    /// True when `value` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.stderr
    }

    fn exact(value: f64, trials: u64, seed: u64) -> Self {
        Self { estimate: value, stderr: 0.0, trials, seed }
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Unit-mean exponential fading gain `-ln(u)` with `u` uniform on `(0, 1]`.
#[inline]
fn fading<R: Rng>(rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    -u.ln()
}

fn run_blocks<F>(trials: u64, seed: u64, sample: F) -> Result<McResult>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let partial: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK_TRIALS.min(trials - b * BLOCK_TRIALS);
            let mut rng = block_rng(seed, b);
            let mut m = Moments::default();
            for _ in 0..n {
                m.push(sample(&mut rng));
            }
            m
        })
        .collect();

    let total = partial.into_iter().fold(Moments::default(), Moments::merge);
    let var = total.m2 / (total.n - 1.0);
    Ok(McResult { estimate: total.mean, stderr: (var / total.n).sqrt(), trials, seed })
}

fn check_inputs(schedule: &PowerSchedule, gains: &[f64], targets: &[f64]) -> Result<()> {
    if schedule.rounds() == 0 {
        return Err(Error::InvalidParameter("schedule has no rounds".into()));
    }
    for &g in gains {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!("gain {g} must be > 0")));
        }
    }
    for &t in targets {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("target SNR {t} must be >= 0")));
        }
    }
    Ok(())
}

/// Fraction of trials in which the weak user's combined SINR stays below `gamma1`.
pub fn simulate_user1_outage(
    schedule: &PowerSchedule,
    gain1: f64,
    gamma1: f64,
    trials: u64,
    seed: u64,
) -> Result<McResult> {
    check_inputs(schedule, &[gain1], &[gamma1])?;
    if gamma1 == 0.0 {
        return Ok(McResult::exact(0.0, trials, seed));
    }
    let beta_sum: f64 = (0..schedule.rounds()).map(|t| schedule.beta(t)).sum();
    if beta_sum <= gamma1 {
        return Ok(McResult::exact(1.0, trials, seed));
    }
    let (p1, p2) = (schedule.p1(), schedule.p2());
    run_blocks(trials, seed, |rng| {
        let acc: f64 = p1.iter().zip(p2).map(|(&a, &b)| sinr_weak(a, b, fading(rng), gain1)).sum();
        if acc < gamma1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Fraction of trials in which the strong user fails either SIC stage.
pub fn simulate_user2_outage(
    schedule: &PowerSchedule,
    gain2: f64,
    gamma1: f64,
    gamma2: f64,
    trials: u64,
    seed: u64,
) -> Result<McResult> {
    check_inputs(schedule, &[gain2], &[gamma1, gamma2])?;
    let (p1, p2) = (schedule.p1(), schedule.p2());
    run_blocks(trials, seed, |rng| {
        let (mut first, mut second) = (0.0, 0.0);
        for (&a, &b) in p1.iter().zip(p2) {
            let (s1, s2) = sinr_strong(a, b, fading(rng), gain2);
            first += s1;
            second += s2;
        }
        if first >= gamma1 && second >= gamma2 {
            0.0
        } else {
            1.0
        }
    })
}

/// Mean power spent per episode, summed over the rounds actually used.
///
/// Every round costs `p1_t + p2_t`. An episode ends once both users have
/// decoded from their combined SINR, or after the last round.
pub fn simulate_episode_power(
    schedule: &PowerSchedule,
    gain1: f64,
    gain2: f64,
    gamma1: f64,
    gamma2: f64,
    trials: u64,
    seed: u64,
) -> Result<McResult> {
    check_inputs(schedule, &[gain1, gain2], &[gamma1, gamma2])?;
    let rounds = schedule.rounds();
    if rounds == 1 {
        return Ok(McResult::exact(schedule.round_power(0), trials, seed));
    }
    let (p1, p2) = (schedule.p1(), schedule.p2());
    run_blocks(trials, seed, |rng| {
        let (mut acc1, mut acc2a, mut acc2b) = (0.0, 0.0, 0.0);
        let mut spent = 0.0;
        for t in 0..rounds {
            spent += p1[t] + p2[t];
            acc1 += sinr_weak(p1[t], p2[t], fading(rng), gain1);
            let (s1, s2) = sinr_strong(p1[t], p2[t], fading(rng), gain2);
            acc2a += s1;
            acc2b += s2;
            let done1 = acc1 >= gamma1;
            let done2 = acc2a >= gamma1 && acc2b >= gamma2;
            if done1 && done2 {
                break;
            }
        }
        spent
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{average_power, retransmission_prob};
    use crate::outage::{lemma1_threshold, user2_outage_closed, User2OutageInput};

    fn pool(threads: usize) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
    }

    #[test]
    fn user1_trivial_cases() {
        let s = PowerSchedule::constant(0.2, 1.0, 2).unwrap();
        let r = simulate_user1_outage(&s, 1.0, 0.5, 20_000, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        let s = PowerSchedule::constant(2.0, 1.0, 2).unwrap();
        assert_eq!(simulate_user1_outage(&s, 1.0, 0.0, 20_000, 1).unwrap().estimate, 0.0);
    }

    #[test]
    fn user1_single_round_exact() {
        let s = PowerSchedule::constant(2.0, 1.0, 1).unwrap();
        let r = simulate_user1_outage(&s, 1.0, 0.5, 1_000_000, 7).unwrap();
        let exact = 1.0 - (-1.0f64 / 3.0).exp();
        assert!(r.agrees_with(exact, 3.0), "{r:?} vs {exact}");
        assert!((r.estimate - 0.2835).abs() < 3.0 * r.stderr + 1e-4);
    }

    #[test]
    fn user2_zero_targets() {
        let s = PowerSchedule::constant(2.0, 1.0, 2).unwrap();
        assert_eq!(simulate_user2_outage(&s, 1.0, 0.0, 0.0, 20_000, 3).unwrap().estimate, 0.0);
    }

    #[test]
    fn user2_lemma1_equality() {
        let (g1, g2) = (0.2, 1.0);
        let p2 = 2.0;
        let p1 = 1.5 * lemma1_threshold(g1, g2) * p2;
        let gain = 1.0 / (17.0 * 0.1);
        let s = PowerSchedule::constant(p1, p2, 1).unwrap();
        let r = simulate_user2_outage(&s, gain, g1, g2, 1_000_000, 11).unwrap();
        let exact = 1.0 - (-g2 / (p2 * gain)).exp();
        assert!(r.agrees_with(exact, 3.0), "{r:?} vs {exact}");
    }

    #[test]
    fn user2_two_rounds_matches_closed_form() {
        let s = PowerSchedule::new(vec![8.0, 6.0], vec![1.0, 1.5]).unwrap();
        let gain = 0.4;
        let r = simulate_user2_outage(&s, gain, 0.2, 1.0, 1_000_000, 5).unwrap();
        let closed = user2_outage_closed(&User2OutageInput::new(s.p2().to_vec(), gain, 1.0, 10).unwrap())
            .unwrap()
            .value;
        assert!((r.estimate - closed).abs() <= (3.0 * r.stderr).max(1.5e-2), "{r:?} vs {closed}");
    }

    #[test]
    fn episode_single_round_is_deterministic() {
        let s = PowerSchedule::constant(3.0, 1.0, 1).unwrap();
        let r = simulate_episode_power(&s, 0.1, 0.5, 0.2, 1.0, 10_000, 0).unwrap();
        assert_eq!(r.estimate, 4.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn episode_high_power_spends_first_round() {
        let s = PowerSchedule::new(vec![8e5, 1.0], vec![2e5, 1.0]).unwrap();
        let r = simulate_episode_power(&s, 0.1, 0.5, 0.2, 1.0, 100_000, 2).unwrap();
        assert!(r.agrees_with(1e6, 3.0) || (r.estimate - 1e6).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn episode_matches_average_power_formula() {
        let s = PowerSchedule::new(vec![3.0, 4.0], vec![1.0, 1.5]).unwrap();
        let (gain1, gain2, g1, g2) = (0.3, 0.8, 0.2, 1.0);
        let trials = 1_000_000;
        let first = s.truncated(1).unwrap();
        let o1 = simulate_user1_outage(&first, gain1, g1, trials, 21).unwrap().estimate;
        let o2 = simulate_user2_outage(&first, gain2, g1, g2, trials, 22).unwrap().estimate;
        let predicted = average_power(&s, &[1.0, retransmission_prob(o1, o2)]).unwrap();
        let r = simulate_episode_power(&s, gain1, gain2, g1, g2, trials, 23).unwrap();
        // Both sides carry sampling noise; the formula side adds ~p2 * stderr(P).
        let tol = 3.0 * r.stderr + 3.0 * s.round_power(1) * 1e-3;
        assert!((r.estimate - predicted).abs() <= tol, "{r:?} vs {predicted}");
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let s = PowerSchedule::new(vec![3.0, 4.0, 2.0], vec![1.0, 1.5, 0.5]).unwrap();
        let run = || {
            (
                simulate_user1_outage(&s, 0.3, 0.5, 300_001, 9).unwrap(),
                simulate_user2_outage(&s, 0.8, 0.2, 1.0, 300_001, 9).unwrap(),
                simulate_episode_power(&s, 0.3, 0.8, 0.2, 1.0, 300_001, 9).unwrap(),
            )
        };
        let one = pool(1).install(run);
        let four = pool(4).install(run);
        let again = pool(3).install(run);
        for (a, b) in [(one.0, four.0), (one.1, four.1), (one.2, four.2), (one.0, again.0)] {
            assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
            assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let s = PowerSchedule::constant(3.0, 1.0, 2).unwrap();
        let a = simulate_user1_outage(&s, 0.3, 0.5, 50_000, 1).unwrap();
        let b = simulate_user1_outage(&s, 0.3, 0.5, 50_000, 2).unwrap();
        assert_ne!(a.estimate, b.estimate);
    }

    #[test]
    fn rejects_small_trial_counts() {
        let s = PowerSchedule::constant(3.0, 1.0, 2).unwrap();
        assert!(simulate_user1_outage(&s, 0.3, 0.5, 9_999, 1).is_err());
    }

    #[test]
    fn monotone_in_target() {
        let s = PowerSchedule::constant(3.0, 1.0, 2).unwrap();
        let mut prev1 = 0.0;
        let mut prev2 = 0.0;
        for g in [0.1, 0.3, 0.6, 1.0, 2.0] {
            let a = simulate_user1_outage(&s, 0.3, g, 100_000, 4).unwrap();
            let b = simulate_user2_outage(&s, 0.8, 0.2, g, 100_000, 4).unwrap();
            assert!(a.estimate + 3.0 * a.stderr >= prev1);
            assert!(b.estimate + 3.0 * b.stderr >= prev2);
            prev1 = a.estimate;
            prev2 = b.estimate;
        }
    }
}
