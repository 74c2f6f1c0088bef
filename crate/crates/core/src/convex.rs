//! Log-barrier solver for small exponential-sum programs.
//!
//! Every function has the form `Σ_k w_k exp(a_k·x + c_k) + b·x + d`. Such a
//! function is convex when each negative-weight term has a constant exponent,
//! and the solver refuses anything else.
//!
//! Equalities are affine and removed up front by Gauss-Jordan elimination.
//! The reduced problem is solved by barrier path following
//! (`t = 1, 10, …, 1e8`) with damped Newton centering, after a slack-based
//! phase 1 when the start point is not strictly feasible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Slack phase 1 aims for before handing over to the barrier. Points closer
/// to the boundary than rounding noise make the barrier Hessian useless.
const INTERIOR_MARGIN: f64 = 1e-6;
/// Phase-1 search box half-width, relative to `1 + |x0|_∞`.
const PHASE1_BOX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub coefficients: Vec<f64>,
    pub constant: f64,
}

impl AffineForm {
    pub fn new(coefficients: Vec<f64>, constant: f64) -> Self {
        Self { coefficients, constant }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coefficients: vec![0.0; dim], constant: 0.0 }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self { coefficients: vec![0.0; dim], constant: value }
    }

    /// `coeff * x_i`.
    pub fn unit(dim: usize, i: usize, coeff: f64) -> Self {
        let mut f = Self::zeros(dim);
        f.coefficients[i] = coeff;
        f
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coefficients.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.iter().all(|&a| a == 0.0)
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, other: &AffineForm, k: f64) {
        for (a, b) in self.coefficients.iter_mut().zip(&other.coefficients) {
            *a += k * b;
        }
        self.constant += k * other.constant;
    }

    fn eval_vec(&self, x: &DVector<f64>) -> f64 {
        self.eval(x.as_slice())
    }

    fn substitute(&self, map: &BackSubstitution) -> AffineForm {
        let a = DVector::from_column_slice(&self.coefficients);
        let coefficients = (map.basis.transpose() * &a).as_slice().to_vec();
        let constant = self.constant + a.dot(&map.offset);
        AffineForm { coefficients, constant }
    }

    fn extended(&self, extra: f64) -> AffineForm {
        let mut coefficients = self.coefficients.clone();
        coefficients.push(extra);
        AffineForm { coefficients, constant: self.constant }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub weight: f64,
    pub exponent: AffineForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpSumFunction {
    pub terms: Vec<ExpTerm>,
    pub linear_part: AffineForm,
}

impl ExpSumFunction {
    pub fn new(dim: usize) -> Self {
        Self { terms: Vec::new(), linear_part: AffineForm::zeros(dim) }
    }

    pub fn affine(form: AffineForm) -> Self {
        Self { terms: Vec::new(), linear_part: form }
    }

    pub fn with_exp(mut self, weight: f64, exponent: AffineForm) -> Self {
        self.add_exp(weight, exponent);
        self
    }

    pub fn add_exp(&mut self, weight: f64, exponent: AffineForm) {
        self.terms.push(ExpTerm { weight, exponent });
    }

    pub fn dim(&self) -> usize {
        self.linear_part.dim()
    }

    /// Convex iff every negative-weight term has a constant exponent.
    pub fn is_convex_certified(&self) -> bool {
        self.terms.iter().all(|t| t.weight >= 0.0 || t.exponent.is_constant())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.linear_part.eval(x)
            + self.terms.iter().map(|t| t.weight * t.exponent.eval(x).exp()).sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear_part.coefficients.clone();
        for t in &self.terms {
            let e = t.weight * t.exponent.eval(x).exp();
            for (gi, a) in g.iter_mut().zip(&t.exponent.coefficients) {
                *gi += e * a;
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for t in &self.terms {
            let e = t.weight * t.exponent.eval(x).exp();
            let a = DVector::from_column_slice(&t.exponent.coefficients);
            h.ger(e, &a, &a, 1.0);
        }
        h
    }

    /// Value, gradient and Hessian in one pass.
    fn eval_full(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut f = self.linear_part.eval_vec(x);
        let mut g = DVector::from_column_slice(&self.linear_part.coefficients);
        let mut h = DMatrix::zeros(n, n);
        for t in &self.terms {
            let e = t.weight * t.exponent.eval_vec(x).exp();
            f += e;
            if t.exponent.is_constant() {
                continue;
            }
            let a = DVector::from_column_slice(&t.exponent.coefficients);
            g.axpy(e, &a, 1.0);
            h.ger(e, &a, &a, 1.0);
        }
        (f, g, h)
    }

    /// Size of the gradient before cancellation between terms.
    fn gradient_scale(&self, x: &DVector<f64>) -> f64 {
        let linear = self.linear_part.coefficients.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        self.terms.iter().fold(linear, |acc, t| {
            let a = t.exponent.coefficients.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            acc + (t.weight * t.exponent.eval_vec(x).exp()).abs() * a
        })
    }

    fn eval_value(&self, x: &DVector<f64>) -> f64 {
        self.value(x.as_slice())
    }

    fn substitute(&self, map: &BackSubstitution) -> ExpSumFunction {
        ExpSumFunction {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm { weight: t.weight, exponent: t.exponent.substitute(map) })
                .collect(),
            linear_part: self.linear_part.substitute(map),
        }
    }

    fn extended(&self, extra_linear: f64) -> ExpSumFunction {
        ExpSumFunction {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm { weight: t.weight, exponent: t.exponent.extended(0.0) })
                .collect(),
            linear_part: self.linear_part.extended(extra_linear),
        }
    }
}

/// `minimize objective` s.t. `inequalities ≤ 0`, `equalities = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub n_vars: usize,
    pub objective: ExpSumFunction,
    pub inequalities: Vec<ExpSumFunction>,
    pub equalities: Vec<AffineForm>,
}

impl SubproblemSpec {
    pub fn new(n_vars: usize, objective: ExpSumFunction) -> Self {
        Self { n_vars, objective, inequalities: Vec::new(), equalities: Vec::new() }
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.inequalities.iter().map(|f| f.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_equality_residual(&self, x: &[f64]) -> f64 {
        self.equalities.iter().map(|e| e.eval(x).abs()).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let check_dim = |d: usize| {
            if d == self.n_vars {
                Ok(())
            } else {
                Err(Error::LengthMismatch { expected: self.n_vars, actual: d })
            }
        };
        for f in std::iter::once(&self.objective).chain(&self.inequalities) {
            check_dim(f.dim())?;
            for t in &f.terms {
                check_dim(t.exponent.dim())?;
            }
        }
        for e in &self.equalities {
            check_dim(e.dim())?;
        }
        for (i, f) in std::iter::once(&self.objective).chain(&self.inequalities).enumerate() {
            if !f.is_convex_certified() {
                let which = if i == 0 { "objective".to_string() } else { format!("inequality {}", i - 1) };
                return Err(Error::NotConvex(format!(
                    "{which} has a negative-weight exponential with a non-constant exponent"
                )));
            }
        }
        Ok(())
    }
}

/// Maps reduced coordinates `r` back to `x = offset + basis · r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackSubstitution {
    pub offset: DVector<f64>,
    pub basis: DMatrix<f64>,
    /// Original indices of the variables kept as reduced coordinates.
    pub free: Vec<usize>,
}

impl BackSubstitution {
    fn identity(n: usize) -> Self {
        Self { offset: DVector::zeros(n), basis: DMatrix::identity(n, n), free: (0..n).collect() }
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        (&self.offset + &self.basis * DVector::from_column_slice(r)).as_slice().to_vec()
    }

    /// Reduced coordinates of a full-space point (exact when it satisfies the equalities).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| x[i]).collect()
    }
}

/// Removes the affine equalities by Gauss-Jordan elimination with complete pivoting.
pub fn eliminate_equalities(spec: &SubproblemSpec) -> Result<(SubproblemSpec, BackSubstitution)> {
    let n = spec.n_vars;
    let p = spec.equalities.len();
    if p == 0 {
        return Ok((spec.clone(), BackSubstitution::identity(n)));
    }
    let mut a = DMatrix::from_fn(p, n, |i, j| spec.equalities[i].coefficients[j]);
    let mut b = DVector::from_fn(p, |i, _| -spec.equalities[i].constant);
    let scale = a.amax().max(1.0);
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut is_pivot = vec![false; n];

    for k in 0..p.min(n) {
        let mut best = (0.0, k, 0);
        for i in k..p {
            for j in (0..n).filter(|&j| !is_pivot[j]) {
                if a[(i, j)].abs() > best.0 {
                    best = (a[(i, j)].abs(), i, j);
                }
            }
        }
        let (mag, row, col) = best;
        if mag <= 1e-12 * scale {
            break;
        }
        a.swap_rows(k, row);
        b.swap_rows(k, row);
        let piv = a[(k, col)];
        a.row_mut(k).scale_mut(1.0 / piv);
        b[k] /= piv;
        for i in (0..p).filter(|&i| i != k) {
            let factor = a[(i, col)];
            if factor != 0.0 {
                for j in 0..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= factor * v;
                }
                b[i] -= factor * b[k];
            }
        }
        is_pivot[col] = true;
        pivot_cols.push(col);
    }

    let rank = pivot_cols.len();
    let residual = (rank..p).map(|i| b[i].abs()).fold(0.0, f64::max);
    if residual > 1e-10 * b.amax().max(1.0) {
        return Err(Error::InconsistentEqualities(residual));
    }

    let free: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
    let mut offset = DVector::zeros(n);
    let mut basis = DMatrix::zeros(n, free.len());
    for (k, &col) in pivot_cols.iter().enumerate() {
        offset[col] = b[k];
        for (c, &f) in free.iter().enumerate() {
            basis[(col, c)] = -a[(k, f)];
        }
    }
    for (c, &f) in free.iter().enumerate() {
        basis[(f, c)] = 1.0;
    }
    let map = BackSubstitution { offset, basis, free };

    let reduced = SubproblemSpec {
        n_vars: map.free.len(),
        objective: spec.objective.substitute(&map),
        inequalities: spec.inequalities.iter().map(|f| f.substitute(&map)).collect(),
        equalities: Vec::new(),
    };
    Ok((reduced, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub point: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    /// Squared Newton decrement after each accepted step, one list per centering.
    pub decrements: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub kkt_tol: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub t_factor: f64,
    pub max_newton_steps: usize,
    /// Centering stops once `λ²/2` falls below this.
    pub newton_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            kkt_tol: 1e-7,
            t_start: 1.0,
            t_end: 1e8,
            t_factor: 10.0,
            max_newton_steps: 200,
            newton_tol: 1e-12,
        }
    }
}

pub fn solve(spec: &SubproblemSpec, opts: &SolverOptions) -> Result<Solution> {
    solve_from(spec, None, opts)
}

/// Like [`solve`], starting from `start` (full space) when given.
pub fn solve_from(spec: &SubproblemSpec, start: Option<&[f64]>, opts: &SolverOptions) -> Result<Solution> {
    spec.validate()?;
    if let Some(s) = start {
        if s.len() != spec.n_vars {
            return Err(Error::LengthMismatch { expected: spec.n_vars, actual: s.len() });
        }
    }
    let (reduced, map) = match eliminate_equalities(spec) {
        Ok(v) => v,
        Err(Error::InconsistentEqualities(_)) => {
            let point = start.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; spec.n_vars]);
            return Ok(Solution {
                objective_value: spec.objective.value(&point),
                point,
                status: SolveStatus::Infeasible,
                kkt_residual: f64::INFINITY,
                decrements: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let r0 = match start {
        Some(s) => DVector::from_vec(map.project(s)),
        None => DVector::zeros(reduced.n_vars),
    };
    let mut sol = solve_reduced(&reduced, r0, opts);
    sol.point = map.apply(&sol.point);
    sol.objective_value = spec.objective.value(&sol.point);
    Ok(sol)
}

/// Barrier function `t·f0 - Σ log(shift - f_i)` over a fixed constraint set.
struct Barrier<'a> {
    objective: &'a ExpSumFunction,
    constraints: &'a [ExpSumFunction],
    shift: f64,
}

impl Barrier<'_> {
    fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = t * self.objective.eval_value(x);
        for c in self.constraints {
            let slack = self.shift - c.eval_value(x);
            if !(slack > 0.0) {
                return None;
            }
            v -= slack.ln();
        }
        v.is_finite().then_some(v)
    }

    fn grad_hess(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let (_, g0, h0) = self.objective.eval_full(x);
        let mut g = g0 * t;
        let mut h = h0 * t;
        for c in self.constraints {
            let (f, gc, hc) = c.eval_full(x);
            let slack = self.shift - f;
            g.axpy(1.0 / slack, &gc, 1.0);
            h.ger(1.0 / (slack * slack), &gc, &gc, 1.0);
            h += hc / slack;
        }
        (g, h)
    }

    /// Scaled KKT residual with duals `1/(t·slack)`: stationarity relative to
    /// the uncancelled size of the gradients it balances, and the duality gap
    /// `m / t` relative to `1 + |f0|`.
    fn kkt(&self, x: &DVector<f64>, t: f64) -> f64 {
        let (f0, g0, _) = self.objective.eval_full(x);
        let mut g = g0.clone();
        let mut scale = 1.0 + self.objective.gradient_scale(x);
        for c in self.constraints {
            let (f, gc, _) = c.eval_full(x);
            let dual = 1.0 / (t * (self.shift - f));
            g.axpy(dual, &gc, 1.0);
            scale += dual * c.gradient_scale(x);
        }
        let stationarity = g.amax() / scale;
        let gap = self.constraints.len() as f64 / t / (1.0 + f0.abs());
        stationarity.max(gap)
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let base = h.diagonal().amax().max(1.0);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * base } else { reg * 100.0 };
    }
    None
}

struct CenteringOutcome {
    converged: bool,
    stop_early: bool,
}

/// Damped Newton on the barrier at fixed `t`. `stop` is polled after each step.
fn center(
    barrier: &Barrier<'_>,
    x: &mut DVector<f64>,
    t: f64,
    opts: &SolverOptions,
    decrements: &mut Vec<f64>,
    stop: &dyn Fn(&DVector<f64>) -> bool,
    max_step: Option<f64>,
) -> CenteringOutcome {
    let Some(mut phi) = barrier.value(x, t) else {
        return CenteringOutcome { converged: false, stop_early: false };
    };
    for _ in 0..opts.max_newton_steps {
        let (g, h) = barrier.grad_hess(x, t);
        let Some(mut d) = newton_direction(&g, &h) else {
            return CenteringOutcome { converged: false, stop_early: false };
        };
        let lambda_sq = -g.dot(&d);
        if let Some(cap) = max_step {
            let len = d.amax();
            if len > cap {
                d *= cap / len;
            }
        }
        let slope = g.dot(&d);
        if lambda_sq / 2.0 <= opts.newton_tol || !(slope < 0.0) {
            return CenteringOutcome { converged: true, stop_early: false };
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-16 {
            let trial = &*x + &d * alpha;
            if let Some(v) = barrier.value(&trial, t) {
                if v <= phi + 0.25 * alpha * slope {
                    accepted = Some((trial, v));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((next, v)) = accepted else {
            // No descent left at machine precision: as centered as it gets.
            return CenteringOutcome { converged: true, stop_early: false };
        };
        // A step that only moves φ by rounding noise means Newton is done.
        let stalled = phi - v <= 8.0 * f64::EPSILON * phi.abs();
        *x = next;
        phi = v;
        decrements.push(lambda_sq);
        if stalled {
            return CenteringOutcome { converged: true, stop_early: false };
        }
        if stop(x) {
            return CenteringOutcome { converged: true, stop_early: true };
        }
    }
    CenteringOutcome { converged: false, stop_early: false }
}

struct PathResult {
    x: DVector<f64>,
    t: f64,
    all_converged: bool,
    stopped_early: bool,
}

fn follow_path(
    barrier: &Barrier<'_>,
    mut x: DVector<f64>,
    opts: &SolverOptions,
    decrements: &mut Vec<Vec<f64>>,
    stop: &dyn Fn(&DVector<f64>) -> bool,
    max_step: Option<f64>,
) -> PathResult {
    let mut t = opts.t_start;
    let mut all_converged = true;
    loop {
        let mut dec = Vec::new();
        let out = center(barrier, &mut x, t, opts, &mut dec, stop, max_step);
        decrements.push(dec);
        all_converged &= out.converged;
        if out.stop_early {
            return PathResult { x, t, all_converged, stopped_early: true };
        }
        if t >= opts.t_end {
            return PathResult { x, t, all_converged, stopped_early: false };
        }
        t = (t * opts.t_factor).min(opts.t_end);
    }
}

fn solve_reduced(spec: &SubproblemSpec, r0: DVector<f64>, opts: &SolverOptions) -> Solution {
    let n = spec.n_vars;
    let mut decrements = Vec::new();
    let finish = |x: DVector<f64>, status: SolveStatus, kkt: f64, decrements: Vec<Vec<f64>>| Solution {
        objective_value: spec.objective.eval_value(&x),
        point: x.as_slice().to_vec(),
        status,
        kkt_residual: kkt,
        decrements,
    };

    if n == 0 {
        let x = DVector::zeros(0);
        let feasible = spec.inequalities.iter().all(|f| f.eval_value(&x) <= opts.feas_tol);
        let status = if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible };
        return finish(x, status, 0.0, decrements);
    }

    let max_violation = |x: &DVector<f64>| {
        spec.inequalities.iter().map(|f| f.eval_value(x)).fold(f64::NEG_INFINITY, f64::max)
    };

    // Phase 1: minimize s subject to f_i(x) <= s.
    let mut x = r0;
    let mut shift = 0.0;
    if !spec.inequalities.is_empty() && !(max_violation(&x) < -INTERIOR_MARGIN) {
        let v0 = max_violation(&x);
        if !v0.is_finite() {
            return finish(x, SolveStatus::Infeasible, f64::INFINITY, decrements);
        }
        let mut obj = ExpSumFunction::new(n + 1);
        obj.linear_part.coefficients[n] = 1.0;
        let mut cons: Vec<ExpSumFunction> = spec.inequalities.iter().map(|f| f.extended(-1.0)).collect();
        // A box around the start keeps the phase-1 barrier bounded below.
        let radius = PHASE1_BOX * (1.0 + x.amax());
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut f = AffineForm::unit(n + 1, j, sign);
                f.constant = -sign * x[j] - radius;
                cons.push(ExpSumFunction::affine(f));
            }
        }
        let barrier = Barrier { objective: &obj, constraints: &cons, shift: 0.0 };
        let mut xs = x.clone().insert_row(n, v0 + v0.abs().max(1.0));
        let stop = |z: &DVector<f64>| z[n] < -INTERIOR_MARGIN;
        // Phase 1 is often unbounded away from the constraints; short steps
        // keep it near the start point until the slack turns negative.
        let path = follow_path(&barrier, xs.clone(), opts, &mut decrements, &stop, Some(1.0));
        xs = path.x;
        x = xs.rows(0, n).into_owned();
        let v = max_violation(&x);
        if !path.stopped_early && !(v < 0.0) {
            if v > opts.feas_tol {
                return finish(x, SolveStatus::Infeasible, f64::INFINITY, decrements);
            }
            // Feasible only to tolerance: centre on the relaxed set f_i <= feas_tol.
            shift = opts.feas_tol;
            if !(v < shift) {
                return finish(x, SolveStatus::Infeasible, f64::INFINITY, decrements);
            }
        }
    }

    let barrier = Barrier { objective: &spec.objective, constraints: &spec.inequalities, shift };
    let never = |_: &DVector<f64>| false;
    let path = follow_path(&barrier, x, opts, &mut decrements, &never, None);
    let kkt = barrier.kkt(&path.x, path.t);
    let feasible = spec.inequalities.is_empty() || max_violation(&path.x) <= opts.feas_tol;
    let status = if !feasible {
        SolveStatus::Infeasible
    } else if path.all_converged && kkt <= opts.kkt_tol {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    };
    finish(path.x, status, kkt, decrements)
}
