//! Successive convex approximation of the average-power minimisation.
//!
//! The optimised model treats the weak user as decoded whenever
//! `p1_t / p2_t ≥ γ1`, so the retransmission probability of round `t` is the
//! strong user's outage after `t - 1` rounds:
//!
//! ```text
//! min  Σ_t (p1_t + p2_t) Q(p2_1..p2_{t-1})
//! s.t. Q(p2_1..p2_T) ≤ δ2,  p1_t ≥ γ1 p2_t,  p1_t + p2_t ≤ P_max
//! Q(p2_1..p2_k) = Σ_m c_m Π_l 1 / (1 + g_m p2_l),  g_m = m λ2 ln2 / γ2
//! ```
//!
//! where `c_m` are the Stehfest CDF coefficients (`Q() = 1`). With
//! `y = ln p1`, `z = ln p2`, `x_{m,t} = -ln(1 + g_m p2_t)` every product
//! becomes an exponential of an affine form. Each outer iteration linearises
//! the negative-coefficient exponentials and the defining equality of `x`
//! around the current point and hands the result to [`crate::convex`].
//!
//! The linearised equality is not a conservative bound, so a subproblem
//! optimum can violate the true outage constraint or raise the true
//! objective. Each step is therefore damped in log-power space until the
//! model stays feasible and the objective does not increase.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::convex::{solve_from, AffineForm, ExpSumFunction, SolveStatus, SolverOptions, SubproblemSpec};
use crate::error::{Error, Result};
use crate::model::{average_power, retransmission_prob, LinkParams, PowerSchedule, QosSpec};
use crate::outage::{
    user1_outage_closed, user1_outage_exact_single_round, user2_outage_closed, User1OutageInput,
    User2OutageInput,
};
use crate::quadrature::{stehfest_weights, DEFAULT_CHEBYSHEV_N, DEFAULT_STEHFEST_M};

pub const DEFAULT_MAX_OUTER_ITERATIONS: usize = 500;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Relative slack on the ratio and power-cap checks.
const BOUND_TOL: f64 = 1e-8;
const MAX_STEP_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaParams {
    pub rounds: usize,
    pub link1: LinkParams,
    pub link2: LinkParams,
    pub qos1: QosSpec,
    pub qos2: QosSpec,
    pub p_max: f64,
    /// Stop once successive objectives differ by less than this (Watt).
    pub tolerance: f64,
    pub stehfest_m: usize,
    pub chebyshev_n: usize,
    pub max_outer_iterations: usize,
}

impl ScaParams {
    pub fn new(
        rounds: usize,
        link1: LinkParams,
        link2: LinkParams,
        qos1: QosSpec,
        qos2: QosSpec,
        p_max: f64,
    ) -> Result<Self> {
        let p = Self {
            rounds,
            link1,
            link2,
            qos1,
            qos2,
            p_max,
            tolerance: DEFAULT_TOLERANCE,
            stehfest_m: DEFAULT_STEHFEST_M,
            chebyshev_n: DEFAULT_CHEBYSHEV_N,
            max_outer_iterations: DEFAULT_MAX_OUTER_ITERATIONS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be >= 1".into()));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("p_max {} must be > 0", self.p_max)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("SCA tolerance must be > 0".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidParameter("max_outer_iterations must be >= 1".into()));
        }
        stehfest_weights(self.stehfest_m)?;
        Ok(())
    }

    pub fn with_rounds(&self, rounds: usize) -> Self {
        Self { rounds, ..self.clone() }
    }

    pub fn gamma1(&self) -> f64 {
        self.qos1.target_snr
    }

    pub fn delta2(&self) -> f64 {
        self.qos2.max_outage
    }

    /// `g_m = m λ2 ln2 / γ2`, `m = 1..M`.
    pub fn g(&self) -> Vec<f64> {
        let lambda2 = self.link2.gain();
        (1..=self.stehfest_m).map(|m| m as f64 * lambda2 * LN_2 / self.qos2.target_snr).collect()
    }

    /// Stehfest CDF coefficients `c_m = V_m / m`.
    pub fn coefficients(&self) -> Vec<f64> {
        stehfest_weights(self.stehfest_m).map(|w| w.cdf_coefficients()).unwrap_or_default()
    }

    fn model(&self) -> Model {
        Model { g: self.g(), c: self.coefficients() }
    }
}

/// Closed-form pieces of the optimised model.
struct Model {
    g: Vec<f64>,
    c: Vec<f64>,
}

impl Model {
    /// Strong-user outage after the rounds in `p2` (1 for no rounds), unclamped.
    fn outage(&self, p2: &[f64]) -> f64 {
        if p2.is_empty() {
            return 1.0;
        }
        self.g
            .iter()
            .zip(&self.c)
            .map(|(&g, &c)| c * p2.iter().map(|&p| 1.0 / (1.0 + g * p)).product::<f64>())
            .sum()
    }

    fn objective(&self, p1: &[f64], p2: &[f64]) -> f64 {
        (0..p1.len()).map(|t| (p1[t] + p2[t]) * self.outage(&p2[..t])).sum()
    }
}

/// Objective of the optimised model at `schedule`.
pub fn model_objective(params: &ScaParams, schedule: &PowerSchedule) -> f64 {
    params.model().objective(schedule.p1(), schedule.p2())
}

/// Strong-user outage of the optimised model after all rounds, unclamped.
pub fn model_outage(params: &ScaParams, schedule: &PowerSchedule) -> f64 {
    params.model().outage(schedule.p2())
}

/// Names the first violated constraint of the optimised model, if any.
pub fn model_violation(params: &ScaParams, schedule: &PowerSchedule) -> Option<String> {
    if schedule.rounds() != params.rounds {
        return Some(format!("schedule has {} rounds, expected {}", schedule.rounds(), params.rounds));
    }
    let g1 = params.gamma1();
    for t in 0..schedule.rounds() {
        let (p1, p2) = (schedule.p1()[t], schedule.p2()[t]);
        if !(p2 > 0.0) {
            return Some(format!("p2 must be > 0 in round {}", t + 1));
        }
        if p1 < g1 * p2 * (1.0 - BOUND_TOL) {
            return Some(format!("power ratio p1/p2 = {} < γ1 = {g1} in round {}", p1 / p2, t + 1));
        }
        if p1 + p2 > params.p_max * (1.0 + BOUND_TOL) {
            return Some(format!("power cap {} exceeded in round {}: {}", params.p_max, t + 1, p1 + p2));
        }
    }
    let q = model_outage(params, schedule);
    if q > params.delta2() {
        return Some(format!("outage constraint: {q} > δ2 = {}", params.delta2()));
    }
    None
}

/// Full average power with both users' closed-form outages in the
/// retransmission probabilities. Single-round weak-user outage is exact.
pub fn full_average_power(params: &ScaParams, schedule: &PowerSchedule) -> Result<f64> {
    let gain1 = params.link1.gain();
    let gain2 = params.link2.gain();
    let (g1, g2) = (params.gamma1(), params.qos2.target_snr);
    let mut retrans = vec![1.0];
    for t in 1..schedule.rounds() {
        let prefix = schedule.truncated(t)?;
        let out1 = if t == 1 {
            user1_outage_exact_single_round(prefix.p1()[0], prefix.p2()[0], gain1, g1)
        } else {
            let input = User1OutageInput::new(prefix.clone(), gain1, g1, params.chebyshev_n, params.stehfest_m)?;
            user1_outage_closed(&input)?.value
        };
        let input = User2OutageInput::new(prefix.p2().to_vec(), gain2, g2, params.stehfest_m)?;
        let out2 = user2_outage_closed(&input)?.value;
        retrans.push(retransmission_prob(out1, out2));
    }
    average_power(schedule, &retrans)
}

/// Point in the transformed variables.
#[derive(Debug, Clone, PartialEq)]
pub struct CovPoint {
    /// `x[t][m] = -ln(1 + g_m p2_t)`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u1: f64,
    pub u2: f64,
}

impl CovPoint {
    pub fn rounds(&self) -> usize {
        self.y.len()
    }

    pub fn powers(&self) -> (Vec<f64>, Vec<f64>) {
        (self.y.iter().map(|v| v.exp()).collect(), self.z.iter().map(|v| v.exp()).collect())
    }

    /// Largest violation of `exp(x) (1 + g exp(z)) = 1`.
    pub fn consistency_error(&self, g: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (t, row) in self.x.iter().enumerate() {
            for (m, &x) in row.iter().enumerate() {
                worst = worst.max((x.exp() + g[m] * (x + self.z[t]).exp() - 1.0).abs());
            }
        }
        worst
    }

    /// Flattened into the subproblem's variable layout.
    pub fn to_vector(&self) -> Vec<f64> {
        let t_len = self.rounds();
        let m_len = self.x.first().map_or(0, Vec::len);
        let layout = Layout { m: m_len, t: t_len };
        let mut v = vec![0.0; layout.len()];
        for t in 0..t_len {
            for m in 0..m_len {
                v[layout.x(m, t)] = self.x[t][m];
            }
            v[layout.y(t)] = self.y[t];
            v[layout.z(t)] = self.z[t];
        }
        v[layout.u1()] = self.u1;
        v[layout.u2()] = self.u2;
        v
    }
}

/// Variable indices: all `x` (round-major), then `y`, `z`, `u1`, `u2`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    m: usize,
    t: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.m * self.t + 2 * self.t + 2
    }
    fn x(&self, m: usize, t: usize) -> usize {
        t * self.m + m
    }
    fn y(&self, t: usize) -> usize {
        self.m * self.t + t
    }
    fn z(&self, t: usize) -> usize {
        self.m * self.t + self.t + t
    }
    fn u1(&self) -> usize {
        self.m * self.t + 2 * self.t
    }
    fn u2(&self) -> usize {
        self.u1() + 1
    }
}

/// Transformed point of a power schedule; `u1`, `u2` equal their constraint
/// left-hand sides.
pub fn cov_from_powers(p1: &[f64], p2: &[f64], g: &[f64], c: &[f64]) -> Result<CovPoint> {
    if p1.len() != p2.len() {
        return Err(Error::LengthMismatch { expected: p1.len(), actual: p2.len() });
    }
    if g.len() != c.len() {
        return Err(Error::LengthMismatch { expected: g.len(), actual: c.len() });
    }
    for &p in p1.iter().chain(p2) {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("power {p} must be > 0")));
        }
    }
    let x: Vec<Vec<f64>> = p2.iter().map(|&p| g.iter().map(|&gm| -(gm * p).ln_1p()).collect()).collect();
    let model = Model { g: g.to_vec(), c: c.to_vec() };
    let mut u1 = 0.0;
    let mut u2 = 0.0;
    for t in 1..p1.len() {
        let q = model.outage(&p2[..t]);
        u1 += p1[t] * q;
        u2 += p2[t] * q;
    }
    Ok(CovPoint { x, y: p1.iter().map(|p| p.ln()).collect(), z: p2.iter().map(|p| p.ln()).collect(), u1, u2 })
}

/// Adds `c · exp(e)` to `f`, replacing it by its tangent at `e0` when `c < 0`.
fn push_term(f: &mut ExpSumFunction, c: f64, exponent: AffineForm, e0: f64) {
    if c >= 0.0 {
        f.add_exp(c, exponent);
    } else {
        let k = c * e0.exp();
        f.linear_part.add_scaled(&exponent, k);
        f.linear_part.constant += k * (1.0 - e0);
    }
}

/// Convex subproblem around `point`.
pub fn build_subproblem(point: &CovPoint, params: &ScaParams) -> Result<SubproblemSpec> {
    let g = params.g();
    let c = params.coefficients();
    let t_len = params.rounds;
    if point.rounds() != t_len {
        return Err(Error::LengthMismatch { expected: t_len, actual: point.rounds() });
    }
    let err = point.consistency_error(&g);
    if !(err <= 1e-8) {
        return Err(Error::InvalidParameter(format!("expansion point violates exp(x)(1 + g exp(z)) = 1 by {err:e}")));
    }
    let m_len = g.len();
    let lay = Layout { m: m_len, t: t_len };
    let n = lay.len();

    let mut objective = ExpSumFunction::new(n)
        .with_exp(1.0, AffineForm::unit(n, lay.y(0), 1.0))
        .with_exp(1.0, AffineForm::unit(n, lay.z(0), 1.0));
    objective.linear_part.coefficients[lay.u1()] = 1.0;
    objective.linear_part.coefficients[lay.u2()] = 1.0;
    let mut spec = SubproblemSpec::new(n, objective);

    // Retransmission-weighted power of rounds 2..T bounded by u1 (p1) and u2 (p2).
    for (which, u_idx) in [(0usize, lay.u1()), (1, lay.u2())] {
        let mut f = ExpSumFunction::affine(AffineForm::unit(n, u_idx, -1.0));
        for t in 1..t_len {
            let (v_idx, v0) = if which == 0 { (lay.y(t), point.y[t]) } else { (lay.z(t), point.z[t]) };
            for m in 0..m_len {
                let mut e = AffineForm::unit(n, v_idx, 1.0);
                let mut e0 = v0;
                for l in 0..t {
                    e.coefficients[lay.x(m, l)] = 1.0;
                    e0 += point.x[l][m];
                }
                push_term(&mut f, c[m], e, e0);
            }
        }
        spec.inequalities.push(f);
    }

    // Outage after T rounds.
    let mut f = ExpSumFunction::affine(AffineForm::constant(n, -params.delta2()));
    for m in 0..m_len {
        let mut e = AffineForm::zeros(n);
        let mut e0 = 0.0;
        for t in 0..t_len {
            e.coefficients[lay.x(m, t)] = 1.0;
            e0 += point.x[t][m];
        }
        push_term(&mut f, c[m], e, e0);
    }
    spec.inequalities.push(f);

    for t in 0..t_len {
        // ln γ1 + z_t - y_t <= 0
        let mut ratio = AffineForm::constant(n, params.gamma1().ln());
        ratio.coefficients[lay.z(t)] = 1.0;
        ratio.coefficients[lay.y(t)] = -1.0;
        spec.inequalities.push(ExpSumFunction::affine(ratio));
        spec.inequalities.push(
            ExpSumFunction::affine(AffineForm::constant(n, -params.p_max))
                .with_exp(1.0, AffineForm::unit(n, lay.y(t), 1.0))
                .with_exp(1.0, AffineForm::unit(n, lay.z(t), 1.0)),
        );
    }

    // Tangent of exp(x) + g exp(x + z) = 1 at the expansion point.
    for t in 0..t_len {
        for m in 0..m_len {
            let (x0, z0) = (point.x[t][m], point.z[t]);
            let a = x0.exp();
            let b = g[m] * (x0 + z0).exp();
            let mut eq = AffineForm::zeros(n);
            eq.coefficients[lay.x(m, t)] = a + b;
            eq.coefficients[lay.z(t)] = b;
            eq.constant = a * (1.0 - x0) + b * (1.0 - x0 - z0) - 1.0;
            spec.equalities.push(eq);
        }
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationStatus {
    /// The starting point.
    Start,
    /// A step of the given fraction towards the subproblem optimum was taken.
    Step { fraction: f64, solver: SolveStatus },
    /// No fraction of the step kept the model feasible without raising the objective.
    Stalled { solver: SolveStatus },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaTrace {
    /// Model objective at the start point and after each outer iteration.
    pub objectives: Vec<f64>,
    pub statuses: Vec<IterationStatus>,
    /// True when the stopping gap was reached before the iteration cap.
    pub converged: bool,
}

impl ScaTrace {
    pub fn iterations(&self) -> usize {
        self.objectives.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("trace always holds the start point")
    }

    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.objectives.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

fn log_mix(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| (x.ln() + s * (y.ln() - x.ln())).exp()).collect()
}

/// Pulls `p1` up to `γ1 p2` and scales down onto the power cap, undoing
/// sub-tolerance violations left by the barrier solver.
fn snap_to_bounds(p1: &mut [f64], p2: &mut [f64], gamma1: f64, p_max: f64) {
    for t in 0..p1.len() {
        if p1[t] < gamma1 * p2[t] {
            p1[t] = gamma1 * p2[t];
        }
        let total = p1[t] + p2[t];
        if total > p_max {
            p1[t] *= p_max / total;
            p2[t] *= p_max / total;
        }
    }
}

/// Lowers each `p1_t` to `γ1 p2_t`, the exact minimiser over `p1` for fixed
/// `p2`, round by round and only where the model objective does not rise.
fn tighten_ratio(model: &Model, p1: &mut [f64], p2: &[f64], gamma1: f64) {
    let mut obj = model.objective(p1, p2);
    for t in 0..p1.len() {
        let floor = gamma1 * p2[t];
        if p1[t] <= floor {
            continue;
        }
        let old = std::mem::replace(&mut p1[t], floor);
        let trial = model.objective(p1, p2);
        if trial <= obj {
            obj = trial;
        } else {
            p1[t] = old;
        }
    }
}

/// Runs the outer loop from a model-feasible `init`.
pub fn sca_solve(params: &ScaParams, init: &PowerSchedule) -> Result<(PowerSchedule, ScaTrace)> {
    params.validate()?;
    if let Some(why) = model_violation(params, init) {
        return Err(Error::InfeasibleInit(why));
    }
    let model = params.model();
    let delta2 = params.delta2();
    let opts = SolverOptions::default();

    let (mut p1, mut p2) = (init.p1().to_vec(), init.p2().to_vec());
    let mut current = model.objective(&p1, &p2);
    let mut trace = ScaTrace { objectives: vec![current], statuses: vec![IterationStatus::Start], converged: false };

    for iteration in 1..=params.max_outer_iterations {
        let point = cov_from_powers(&p1, &p2, &model.g, &model.c)?;
        let spec = build_subproblem(&point, params)?;
        let start = point.to_vector();
        debug_assert!(spec.max_violation(&start) <= 1e-9 * (1.0 + current));
        let sol = solve_from(&spec, Some(&start), &opts)?;
        if sol.status == SolveStatus::Infeasible {
            return Err(Error::SubproblemInfeasible { iteration });
        }
        let lay = Layout { m: model.g.len(), t: params.rounds };
        let cand1: Vec<f64> = (0..params.rounds).map(|t| sol.point[lay.y(t)].exp()).collect();
        let cand2: Vec<f64> = (0..params.rounds).map(|t| sol.point[lay.z(t)].exp()).collect();

        let mut accepted = None;
        let mut fraction = 1.0;
        for _ in 0..MAX_STEP_HALVINGS {
            let mut q1 = log_mix(&p1, &cand1, fraction);
            let mut q2 = log_mix(&p2, &cand2, fraction);
            snap_to_bounds(&mut q1, &mut q2, params.gamma1(), params.p_max);
            tighten_ratio(&model, &mut q1, &q2, params.gamma1());
            let obj = model.objective(&q1, &q2);
            if model.outage(&q2) <= delta2 && obj <= current {
                accepted = Some((q1, q2, obj));
                break;
            }
            fraction *= 0.5;
        }
        let Some((q1, q2, obj)) = accepted else {
            trace.objectives.push(current);
            trace.statuses.push(IterationStatus::Stalled { solver: sol.status });
            trace.converged = true;
            break;
        };
        let gap = current - obj;
        p1 = q1;
        p2 = q2;
        current = obj;
        trace.objectives.push(current);
        trace.statuses.push(IterationStatus::Step { fraction, solver: sol.status });
        if gap < params.tolerance {
            trace.converged = true;
            break;
        }
    }
    Ok((PowerSchedule::new(p1, p2)?, trace))
}

/// Every round at the largest `p2` the ratio and cap allow.
pub fn max_p2_schedule(params: &ScaParams) -> Result<PowerSchedule> {
    let p2 = params.p_max / (1.0 + params.gamma1());
    PowerSchedule::constant(params.gamma1() * p2, p2, params.rounds)
}

/// `p1 = 0.7 P_max`, `p2 = 0.3 P_max` in every round.
pub fn default_init(params: &ScaParams) -> Result<PowerSchedule> {
    PowerSchedule::constant(0.7 * params.p_max, 0.3 * params.p_max, params.rounds)
}

/// Whether the optimised model admits any feasible schedule. Its outage
/// falls with every `p2_t`, so the max-`p2` schedule decides.
pub fn is_feasible(params: &ScaParams) -> Result<bool> {
    Ok(model_violation(params, &max_p2_schedule(params)?).is_none())
}

/// The model-feasible schedules among [`default_init`], [`max_p2_schedule`]
/// and the ratio-tight equal-power schedule, in that order.
pub fn start_candidates(params: &ScaParams) -> Result<Vec<PowerSchedule>> {
    let mut candidates = vec![default_init(params)?, max_p2_schedule(params)?];
    if let Some((epa, _)) = epa_baseline(params, params.gamma1())? {
        candidates.push(epa);
    }
    Ok(candidates.into_iter().filter(|s| model_violation(params, s).is_none()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub schedule: PowerSchedule,
    pub trace: ScaTrace,
    pub objective: f64,
}

/// [`sca_solve`] from every [`start_candidates`] entry, keeping the lowest
/// final objective (earlier starts win ties). `None` when no candidate is
/// feasible, which for this model means the problem is infeasible.
pub fn optimize(params: &ScaParams) -> Result<Option<ScaOutcome>> {
    let mut best: Option<ScaOutcome> = None;
    for init in start_candidates(params)? {
        let (schedule, trace) = sca_solve(params, &init)?;
        let objective = trace.final_objective();
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(ScaOutcome { schedule, trace, objective });
        }
    }
    Ok(best)
}

/// Exhaustive search over `{P_max i / L : i = 1..L}` for each of the `2T`
/// powers. Ties go to the lexicographically smallest index tuple, ordered
/// `(p1_1, p2_1, p1_2, p2_2, …)`.
pub fn grid_oracle(params: &ScaParams, levels: usize) -> Result<(PowerSchedule, f64)> {
    params.validate()?;
    let t_len = params.rounds;
    if t_len > 2 {
        return Err(Error::InvalidParameter(format!("grid oracle supports T <= 2, got {t_len}")));
    }
    if levels == 0 {
        return Err(Error::InvalidParameter("grid oracle needs at least one level".into()));
    }
    let model = params.model();
    let level = |i: usize| params.p_max * (i + 1) as f64 / levels as f64;
    // factors[i][m] = 1 / (1 + g_m level(i))
    let factors: Vec<Vec<f64>> =
        (0..levels).map(|i| model.g.iter().map(|&g| 1.0 / (1.0 + g * level(i))).collect()).collect();
    let gamma1 = params.gamma1();
    let delta2 = params.delta2();
    let cap = params.p_max * (1.0 + BOUND_TOL);
    let dims = 2 * t_len;
    let total = levels.pow(dims as u32);

    let best = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let mut rem = idx;
            let mut digits = [0usize; 4];
            for d in (0..dims).rev() {
                digits[d] = rem % levels;
                rem /= levels;
            }
            let mut prod = vec![1.0; model.g.len()];
            let mut obj = 0.0;
            let mut retrans = 1.0;
            for t in 0..t_len {
                let (p1, p2) = (level(digits[2 * t]), level(digits[2 * t + 1]));
                if p1 < gamma1 * p2 * (1.0 - BOUND_TOL) || p1 + p2 > cap {
                    return None;
                }
                obj += (p1 + p2) * retrans;
                for (pm, f) in prod.iter_mut().zip(&factors[digits[2 * t + 1]]) {
                    *pm *= f;
                }
                retrans = prod.iter().zip(&model.c).map(|(p, c)| p * c).sum();
            }
            (retrans <= delta2).then_some((obj, idx))
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });

    let Some((obj, idx)) = best else {
        return Err(Error::NoFeasiblePoint);
    };
    let mut rem = idx;
    let mut digits = vec![0usize; dims];
    for d in (0..dims).rev() {
        digits[d] = rem % levels;
        rem /= levels;
    }
    let p1 = (0..t_len).map(|t| level(digits[2 * t])).collect();
    let p2 = (0..t_len).map(|t| level(digits[2 * t + 1])).collect();
    Ok((PowerSchedule::new(p1, p2)?, obj))
}

/// Smallest round count in `1..=t_max` whose model is feasible, found by
/// bisection, with the optimised schedule for it.
pub fn min_rounds(params: &ScaParams, t_max: usize) -> Result<(usize, ScaOutcome)> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be >= 1".into()));
    }
    let feasible = |t: usize| is_feasible(&params.with_rounds(t));
    // Feasibility at t must carry over to t + 1.
    let checked = |t: usize| -> Result<bool> {
        let ok = feasible(t)?;
        if ok && t < t_max && !feasible(t + 1)? {
            return Err(Error::NonMonotoneFeasibility(format!(
                "feasible with {t} rounds but not with {}",
                t + 1
            )));
        }
        Ok(ok)
    };
    if !checked(t_max)? {
        return Err(Error::InfeasibleRounds(t_max));
    }
    let (mut lo, mut hi) = (0usize, t_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if checked(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let outcome = optimize(&params.with_rounds(hi))?.ok_or(Error::InfeasibleRounds(hi))?;
    Ok((hi, outcome))
}

/// Equal-power baseline: one `(p1, p2) = (r p2, p2)` pair in every round,
/// with `p2` bisected down to the smallest value meeting the outage bound.
/// `ratio` is raised to `γ1` if below it.
pub fn epa_baseline(params: &ScaParams, ratio: f64) -> Result<Option<(PowerSchedule, f64)>> {
    params.validate()?;
    let r = ratio.max(params.gamma1());
    let model = params.model();
    let t_len = params.rounds;
    let outage = |p2: f64| model.outage(&vec![p2; t_len]);
    let mut hi = params.p_max / (1.0 + r);
    if outage(hi) > params.delta2() {
        return Ok(None);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if outage(mid) <= params.delta2() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let schedule = PowerSchedule::constant(r * hi, hi, t_len)?;
    let obj = model.objective(schedule.p1(), schedule.p2());
    Ok(Some((schedule, obj)))
}
