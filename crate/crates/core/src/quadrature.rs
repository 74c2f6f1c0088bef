//! Gauss-Chebyshev nodes and Gaver-Stehfest inverse Laplace weights.
//!
//! The Stehfest weights are the standard coefficients
//!
//! ```text
//! w_m = (-1)^(m + M/2) Σ_{k=⌊(m+1)/2⌋}^{min(m, M/2)}
//!         k^(M/2) (2k)! / ((M/2 - k)! k! (k - 1)! (m - k)! (2k - m)!)
//! ```
//!
//! Some published statements of the outage formulas carry an additional
//! `1/m!` in this expression. That variant fails both exactness identities
//! (`Σ w_m = 0` and `Σ w_m / m = 1`) and is not used here.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// Default number of Gauss-Chebyshev nodes.
pub const DEFAULT_CHEBYSHEV_N: usize = 30;
/// Default Gaver-Stehfest order.
pub const DEFAULT_STEHFEST_M: usize = 10;
/// Largest order for which the weights are computed exactly in `i128`.
pub const MAX_STEHFEST_M: usize = 20;

/// Nodes `a_n = cos((2n - 1)π / (2N))`, `n = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevNodes {
    nodes: Vec<f64>,
}

impl ChebyshevNodes {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Common quadrature weight `π / N`.
    pub fn weight(&self) -> f64 {
        PI / self.nodes.len() as f64
    }

    /// Approximates `∫_lo^hi g(z) dz` with the `sqrt(1 - a²)` Chebyshev rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut g: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let w = self.weight();
        self.nodes
            .iter()
            .map(|&a| w * (1.0 - a * a).sqrt() * g(lo + half * (a + 1.0)))
            .sum::<f64>()
            * half
    }
}

pub fn chebyshev_nodes(n: usize) -> Result<ChebyshevNodes> {
    if n == 0 {
        return Err(Error::InvalidParameter("Chebyshev node count must be >= 1".into()));
    }
    let nodes = (1..=n)
        .map(|k| ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos())
        .collect();
    Ok(ChebyshevNodes { nodes })
}

/// Signed Gaver-Stehfest weights `w_1..w_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct StehfestWeights {
    weights: Vec<f64>,
}

impl StehfestWeights {
    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w_m / m`, the coefficients that appear once the `1/s` of a CDF
    /// transform is folded into the sum.
    pub fn cdf_coefficients(&self) -> Vec<f64> {
        self.weights.iter().enumerate().map(|(i, w)| w / (i + 1) as f64).collect()
    }
}

pub fn stehfest_weights(m_order: usize) -> Result<StehfestWeights> {
    if m_order < 2 || m_order % 2 != 0 || m_order > MAX_STEHFEST_M {
        return Err(Error::InvalidParameter(format!(
            "Stehfest order {m_order} must be even and in [2, {MAX_STEHFEST_M}]"
        )));
    }
    let half = m_order / 2;
    let weights = (1..=m_order)
        .map(|m| {
            let mut acc = Ratio::zero();
            for k in (m + 1) / 2..=m.min(half) {
                let num = (k as i128).pow(half as u32) * factorial(2 * k);
                let den = factorial(half - k)
                    * factorial(k)
                    * factorial(k - 1)
                    * factorial(m - k)
                    * factorial(2 * k - m);
                acc = acc.add(Ratio::new(num, den));
            }
            let sign = if (m + half) % 2 == 0 { 1.0 } else { -1.0 };
            sign * acc.to_f64()
        })
        .collect();
    Ok(StehfestWeights { weights })
}

/// Gaver-Stehfest inversion `f(x) ≈ (ln2 / x) Σ_m w_m F(m ln2 / x)`.
///
/// To recover a CDF from a density transform, pass `F(s) / s`.
pub fn stehfest_invert<F: FnMut(f64) -> f64>(
    mut transform: F,
    x: f64,
    weights: &StehfestWeights,
) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("inversion point {x} must be > 0")));
    }
    let scale = LN_2 / x;
    let mut acc = 0.0;
    for (i, w) in weights.weights.iter().enumerate() {
        let s = (i + 1) as f64 * scale;
        let v = transform(s);
        if !v.is_finite() {
            return Err(Error::NonFiniteTransform(s));
        }
        acc += w * v;
    }
    Ok(scale * acc)
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Nonnegative rational in lowest terms; enough for summing the weight terms.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: i128,
    den: i128,
}

impl Ratio {
    fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    fn new(num: i128, den: i128) -> Self {
        let g = gcd(num, den).max(1);
        Self { num: num / g, den: den / g }
    }

    fn add(self, other: Ratio) -> Ratio {
        let g = gcd(self.den, other.den);
        let lhs = self.num * (other.den / g);
        let rhs = other.num * (self.den / g);
        Ratio::new(lhs + rhs, self.den / g * other.den)
    }

    fn to_f64(self) -> f64 {
        let whole = self.num / self.den;
        let rem = self.num % self.den;
        whole as f64 + rem as f64 / self.den as f64
    }
}
