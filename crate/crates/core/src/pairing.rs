//! Multi-user pairing of cell-center users (CUs) with cell-edge users (EUs).
//!
//! Each CU is paired with exactly one EU and every pair gets its own resource
//! block with power budget `P_T`, so the total power is the sum of the pair
//! costs. The CU takes the strong-user role and the EU the weak-user role.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{LinkParams, PowerSchedule, QosSpec};
use crate::sca::{full_average_power, optimize, ScaParams};

/// Strict improvement a swap must achieve (Watt).
pub const SWAP_THRESHOLD: f64 = 1e-9;
/// Largest `K` the permutation oracle accepts.
pub const ORACLE_MAX_USERS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub k: usize,
    pub cu_distances: Vec<f64>,
    pub eu_distances: Vec<f64>,
    pub r_c: f64,
    pub r_e: f64,
    pub seed: u64,
}

/// Drops `k` CUs area-uniformly in the disk of radius `r_c` and `k` EUs
/// area-uniformly in the annulus `[r_c, r_e]`. CU draws come first.
pub fn sample_placement(k: usize, r_c: f64, r_e: f64, seed: u64) -> Result<Placement> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one user pair".into()));
    }
    if !(r_c > 0.0 && r_c < r_e && r_e.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < R_c < R_e, got R_c = {r_c}, R_e = {r_e}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cu_distances = (0..k).map(|_| r_c * rng.random::<f64>().sqrt()).collect();
    let eu_distances =
        (0..k).map(|_| (r_c * r_c + rng.random::<f64>() * (r_e * r_e - r_c * r_c)).sqrt()).collect();
    Ok(Placement { k, cu_distances, eu_distances, r_c, r_e, seed })
}

/// Everything a pair cost depends on besides the two distances.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCostParams {
    pub rounds: usize,
    pub path_loss_exponent: f64,
    pub noise_power: f64,
    pub qos_cu: QosSpec,
    pub qos_eu: QosSpec,
    /// Power budget of one pair.
    pub pair_power: f64,
    /// Overrides of the SCA defaults.
    pub sca_tolerance: Option<f64>,
    pub sca_max_outer_iterations: Option<usize>,
}

impl PairCostParams {
    fn sca_params(&self, cu: LinkParams, eu: LinkParams) -> Result<ScaParams> {
        let mut p = ScaParams::new(self.rounds, eu, cu, self.qos_eu, self.qos_cu, self.pair_power)?;
        if let Some(tol) = self.sca_tolerance {
            p.tolerance = tol;
        }
        if let Some(iters) = self.sca_max_outer_iterations {
            p.max_outer_iterations = iters;
        }
        p.validate()?;
        Ok(p)
    }

    fn link(&self, distance: f64) -> Result<LinkParams> {
        LinkParams::new(distance, self.path_loss_exponent, self.noise_power)
    }
}

/// Optimised schedule of a CU. The optimised model only involves the strong
/// link, so the schedule is shared by every EU the CU might be paired with.
/// `None` when the CU cannot meet its outage target.
pub fn cu_schedule(cu: LinkParams, params: &PairCostParams) -> Result<Option<PowerSchedule>> {
    let sca = params.sca_params(cu, cu)?;
    Ok(optimize(&sca)?.map(|o| o.schedule))
}

/// Average power of the pair when it runs `schedule`, with both users'
/// outages in the retransmission probabilities.
pub fn pair_cost_with(
    schedule: &PowerSchedule,
    cu: LinkParams,
    eu: LinkParams,
    params: &PairCostParams,
) -> Result<f64> {
    if cu.distance > eu.distance {
        return Err(Error::InvalidParameter(format!(
            "CU at {} m is farther than EU at {} m",
            cu.distance, eu.distance
        )));
    }
    full_average_power(&params.sca_params(cu, eu)?, schedule)
}

/// Average power of pairing `cu` with `eu`; `+∞` when infeasible.
pub fn pair_cost(cu: LinkParams, eu: LinkParams, params: &PairCostParams) -> Result<f64> {
    if cu.distance > eu.distance {
        return Err(Error::InvalidParameter(format!(
            "CU at {} m is farther than EU at {} m",
            cu.distance, eu.distance
        )));
    }
    match cu_schedule(cu, params)? {
        Some(s) => pair_cost_with(&s, cu, eu, params),
        None => Ok(f64::INFINITY),
    }
}

/// `K × K` pair costs, row = CU, column = EU.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    k: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * k {
            return Err(Error::LengthMismatch { expected: k * k, actual: data.len() });
        }
        if let Some(bad) = data.iter().find(|&&c| !(c > 0.0) || c.is_nan()) {
            return Err(Error::InvalidParameter(format!("pair cost {bad} must be > 0 or +inf")));
        }
        Ok(Self { k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch { expected: k, actual: r.len() });
        }
        Self::new(k, rows.concat())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, cu: usize, eu: usize) -> f64 {
        self.data[cu * self.k + eu]
    }

    pub fn row(&self, cu: usize) -> &[f64] {
        &self.data[cu * self.k..(cu + 1) * self.k]
    }

    /// Sum of the costs of `assignment` (CU `i` with EU `assignment[i]`).
    pub fn total(&self, assignment: &[usize]) -> f64 {
        assignment.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// Builds the cost matrix of a placement: one SCA run per CU, then one
/// average-power evaluation per pair. CU rows run in parallel.
pub fn cost_matrix(placement: &Placement, params: &PairCostParams) -> Result<CostMatrix> {
    let eus: Vec<LinkParams> =
        placement.eu_distances.iter().map(|&d| params.link(d)).collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = placement
        .cu_distances
        .par_iter()
        .map(|&d| {
            let cu = params.link(d)?;
            match cu_schedule(cu, params)? {
                Some(s) => eus.iter().map(|&eu| pair_cost_with(&s, cu, eu, params)).collect(),
                None => Ok(vec![f64::INFINITY; eus.len()]),
            }
        })
        .collect::<Result<_>>()?;
    CostMatrix::from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preferences {
    /// `cu[i]` lists EUs from most to least preferred by CU `i`.
    pub cu: Vec<Vec<usize>>,
    /// `eu[j]` lists CUs from most to least preferred by EU `j`.
    pub eu: Vec<Vec<usize>>,
}

fn ranked(costs: impl Fn(usize) -> f64, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..k).collect();
    // Stable sort keeps lower indices first on ties; +inf sorts last.
    idx.sort_by(|&a, &b| costs(a).total_cmp(&costs(b)));
    idx
}

/// Ascending-cost preference lists on both sides. The swap phase only uses
/// pair costs; EU lists are kept for completeness.
pub fn build_preferences(costs: &CostMatrix) -> Preferences {
    let k = costs.k();
    Preferences {
        cu: (0..k).map(|i| ranked(|j| costs.get(i, j), k)).collect(),
        eu: (0..k).map(|j| ranked(|i| costs.get(i, j), k)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingState {
    /// `assignment[i]` is the EU paired with CU `i`.
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    pub swap_count: usize,
    /// Full passes over the CU pairs made by the swap phase.
    pub scans: usize,
}

impl MatchingState {
    pub fn new(assignment: Vec<usize>, costs: &CostMatrix) -> Result<Self> {
        let k = costs.k();
        if assignment.len() != k {
            return Err(Error::LengthMismatch { expected: k, actual: assignment.len() });
        }
        let mut seen = vec![false; k];
        for &j in &assignment {
            if j >= k || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidParameter(format!("assignment {assignment:?} is not a bijection")));
            }
        }
        let total_cost = costs.total(&assignment);
        Ok(Self { assignment, total_cost, swap_count: 0, scans: 0 })
    }
}

/// CUs propose in index order to their first choice; a CU whose first choice
/// is taken gets its best-ranked EU still free.
pub fn initial_matching(prefs: &Preferences, costs: &CostMatrix) -> MatchingState {
    let k = costs.k();
    let mut taken = vec![false; k];
    let assignment: Vec<usize> = prefs
        .cu
        .iter()
        .map(|list| {
            let j = *list.iter().find(|&&j| !taken[j]).expect("a free EU always remains");
            taken[j] = true;
            j
        })
        .collect();
    MatchingState::new(assignment, costs).expect("proposals yield a bijection")
}

/// Swaps partners between CU pairs `(i, i')`, `i < i'`, while a swap lowers
/// the total cost by more than [`SWAP_THRESHOLD`]. Stops after a full scan
/// without swaps.
pub fn swap_phase(mut state: MatchingState, costs: &CostMatrix) -> MatchingState {
    let k = costs.k();
    loop {
        state.scans += 1;
        let mut swapped = false;
        for i in 0..k {
            for i2 in i + 1..k {
                let (j, j2) = (state.assignment[i], state.assignment[i2]);
                let before = costs.get(i, j) + costs.get(i2, j2);
                let after = costs.get(i, j2) + costs.get(i2, j);
                if after < before - SWAP_THRESHOLD {
                    state.assignment.swap(i, i2);
                    state.swap_count += 1;
                    swapped = true;
                }
            }
        }
        if !swapped {
            break;
        }
    }
    state.total_cost = costs.total(&state.assignment);
    state
}

/// Rearranges `perm` into its lexicographic successor; false at the last one.
fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = (1..perm.len()).rev().find(|&i| perm[i - 1] < perm[i]) else {
        return false;
    };
    let j = (i..perm.len()).rev().find(|&j| perm[j] > perm[i - 1]).expect("successor exists");
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Minimum-cost bijection by enumeration of all `K!` assignments in
/// lexicographic order; the first minimum wins ties.
pub fn permutation_oracle(costs: &CostMatrix) -> Result<MatchingState> {
    let k = costs.k();
    if k > ORACLE_MAX_USERS {
        return Err(Error::TooManyUsers(k));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (costs.total(&perm), perm.clone());
    while next_permutation(&mut perm) {
        let c = costs.total(&perm);
        if c < best.0 {
            best = (c, perm.clone());
        }
    }
    MatchingState::new(best.1, costs)
}

/// Initial matching followed by the swap phase.
pub fn swap_matching(costs: &CostMatrix) -> MatchingState {
    let prefs = build_preferences(costs);
    swap_phase(initial_matching(&prefs, costs), costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::Rng;

    fn section6_pair(rounds: usize, pair_power: f64) -> PairCostParams {
        PairCostParams {
            rounds,
            path_loss_exponent: 2.0,
            noise_power: 0.1,
            qos_cu: QosSpec::new(1.0, 0.1).unwrap(),
            qos_eu: QosSpec::new(0.2, 0.1).unwrap(),
            pair_power,
            sca_tolerance: None,
            sca_max_outer_iterations: None,
        }
    }

    fn random_costs(k: usize, seed: u64) -> CostMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CostMatrix::new(k, (0..k * k).map(|_| rng.random_range(1.0..10.0)).collect()).unwrap()
    }

    fn all_permutations(k: usize) -> Vec<Vec<usize>> {
        // Recursive insertion, independent of the lexicographic successor.
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn placement_respects_regions() {
        let p = sample_placement(200, 4.0, 10.0, 7).unwrap();
        assert!(p.cu_distances.iter().all(|&d| (0.0..=4.0).contains(&d)));
        assert!(p.eu_distances.iter().all(|&d| (4.0..=10.0).contains(&d)));
        assert_eq!(p, sample_placement(200, 4.0, 10.0, 7).unwrap());
        assert_ne!(p, sample_placement(200, 4.0, 10.0, 8).unwrap());
    }

    #[test]
    fn placement_mean_cu_distance() {
        let p = sample_placement(1000, 4.0, 10.0, 3).unwrap();
        let mean = p.cu_distances.iter().sum::<f64>() / 1000.0;
        let expected = 2.0 / 3.0 * 4.0;
        assert!((mean / expected - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn placement_rejects_bad_radii() {
        assert!(sample_placement(0, 4.0, 10.0, 0).is_err());
        assert!(sample_placement(3, 10.0, 4.0, 0).is_err());
    }

    #[test]
    fn preferences_sort_ascending_with_ties_and_inf() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.5]]).unwrap();
        let p = build_preferences(&c);
        assert_eq!(p.cu, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(p.eu, vec![vec![0, 1], vec![1, 0]]);

        let flat = CostMatrix::from_rows(&[vec![2.0; 3], vec![1.0; 3], vec![5.0; 3]]).unwrap();
        assert_eq!(build_preferences(&flat).cu[1], vec![0, 1, 2]);

        let inf = CostMatrix::from_rows(&[vec![f64::INFINITY, 3.0, 1.0], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        assert_eq!(build_preferences(&inf).cu[0], vec![2, 1, 0]);
    }

    #[test]
    fn cost_matrix_validation() {
        assert!(CostMatrix::new(2, vec![1.0; 3]).is_err());
        assert!(CostMatrix::new(1, vec![0.0]).is_err());
        assert!(CostMatrix::new(1, vec![f64::NAN]).is_err());
        assert!(CostMatrix::new(1, vec![f64::INFINITY]).is_ok());
    }

    #[test]
    fn initial_matching_cases() {
        let one = CostMatrix::new(1, vec![3.0]).unwrap();
        let m = initial_matching(&build_preferences(&one), &one);
        assert_eq!(m.assignment, vec![0]);
        assert_eq!(m.total_cost, 3.0);

        let distinct = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.5]]).unwrap();
        assert_eq!(initial_matching(&build_preferences(&distinct), &distinct).assignment, vec![0, 1]);

        let conflict = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, 3.0]]).unwrap();
        assert_eq!(initial_matching(&build_preferences(&conflict), &conflict).assignment, vec![0, 1]);

        let three = CostMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(initial_matching(&build_preferences(&three), &three).assignment, vec![0, 2, 1]);
    }

    #[test]
    fn swap_cases() {
        let optimal = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let s = swap_phase(MatchingState::new(vec![0, 1], &optimal).unwrap(), &optimal);
        assert_eq!((s.swap_count, s.assignment.clone()), (0, vec![0, 1]));

        let anti = CostMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = swap_phase(MatchingState::new(vec![0, 1], &anti).unwrap(), &anti);
        assert_eq!(s.swap_count, 1);
        assert_eq!(s.assignment, vec![1, 0]);
        assert_eq!(s.total_cost, 2.0);

        // Equal costs within the threshold never swap.
        let tie = CostMatrix::from_rows(&[vec![1.0, 1.0 - 1e-12], vec![1.0, 1.0]]).unwrap();
        assert_eq!(swap_phase(MatchingState::new(vec![0, 1], &tie).unwrap(), &tie).swap_count, 0);
    }

    #[test]
    fn swap_escapes_infinite_pairs() {
        let c = CostMatrix::from_rows(&[vec![f64::INFINITY, 1.0], vec![1.0, 5.0]]).unwrap();
        let s = swap_phase(MatchingState::new(vec![0, 1], &c).unwrap(), &c);
        assert_eq!(s.assignment, vec![1, 0]);
        assert_eq!(s.total_cost, 2.0);
    }

    #[test]
    fn matching_state_rejects_non_bijection() {
        let c = random_costs(3, 0);
        assert!(MatchingState::new(vec![0, 0, 1], &c).is_err());
        assert!(MatchingState::new(vec![0, 1], &c).is_err());
        assert!(MatchingState::new(vec![0, 1, 3], &c).is_err());
    }

    #[test]
    fn oracle_matches_independent_enumeration() {
        for seed in 0..10 {
            let c = random_costs(3, seed);
            let best = all_permutations(3).into_iter().map(|p| c.total(&p)).fold(f64::INFINITY, f64::min);
            let o = permutation_oracle(&c).unwrap();
            assert_eq!(o.total_cost, best);
        }
        let one = CostMatrix::new(1, vec![2.5]).unwrap();
        assert_eq!(permutation_oracle(&one).unwrap().assignment, vec![0]);
        assert!(matches!(permutation_oracle(&random_costs(9, 0)), Err(Error::TooManyUsers(9))));
    }

    #[test]
    fn oracle_breaks_ties_lexicographically() {
        let c = CostMatrix::new(3, vec![1.0; 9]).unwrap();
        assert_eq!(permutation_oracle(&c).unwrap().assignment, vec![0, 1, 2]);
        let c = CostMatrix::from_rows(&[vec![2.0, 1.0, 1.0], vec![1.0, 2.0, 1.0], vec![1.0, 1.0, 2.0]]).unwrap();
        assert_eq!(permutation_oracle(&c).unwrap().assignment, vec![1, 2, 0]);
    }

    #[test]
    fn next_permutation_counts() {
        for k in 0..6 {
            let mut p: Vec<usize> = (0..k).collect();
            let mut n = 1;
            while next_permutation(&mut p) {
                n += 1;
            }
            assert_eq!(n, all_permutations(k).len());
        }
    }

    proptest! {
        #[test]
        fn swap_result_is_two_swap_stable(k in 1usize..7, seed in any::<u64>()) {
            let c = random_costs(k, seed);
            let init = initial_matching(&build_preferences(&c), &c);
            let s = swap_phase(init.clone(), &c);
            prop_assert!(s.total_cost <= init.total_cost);
            prop_assert!(s.scans <= k.pow(3).max(1));
            for i in 0..k {
                for i2 in i + 1..k {
                    let (j, j2) = (s.assignment[i], s.assignment[i2]);
                    prop_assert!(c.get(i, j2) + c.get(i2, j) >= c.get(i, j) + c.get(i2, j2) - SWAP_THRESHOLD);
                }
            }
            let oracle = permutation_oracle(&c).unwrap();
            prop_assert!(s.total_cost >= oracle.total_cost);
        }
    }

    #[test]
    fn pair_cost_depends_only_on_links() {
        let params = section6_pair(2, 40.0);
        let cu = LinkParams::new(4.0, 2.0, 0.1).unwrap();
        let eu = LinkParams::new(10.0, 2.0, 0.1).unwrap();
        let a = pair_cost(cu, eu, &params).unwrap();
        let b = pair_cost(cu, eu, &params).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite() && a > 0.0);
        assert!(pair_cost(eu, cu, &params).is_err());
    }

    #[test]
    fn pair_cost_nondecreasing_in_eu_distance() {
        let params = section6_pair(3, 40.0);
        let cu = LinkParams::new(4.0, 2.0, 0.1).unwrap();
        let s = cu_schedule(cu, &params).unwrap().unwrap();
        let costs: Vec<f64> = [4.0, 5.0, 6.5, 8.0, 10.0]
            .iter()
            .map(|&d| pair_cost_with(&s, cu, LinkParams::new(d, 2.0, 0.1).unwrap(), &params).unwrap())
            .collect();
        assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{costs:?}");
        assert!(costs[0] < costs[4], "{costs:?}");
        assert!(costs[4] < params.pair_power * 3.0);
    }

    #[test]
    fn pair_cost_infeasible_is_infinite() {
        let mut params = section6_pair(1, 0.5);
        params.qos_cu = QosSpec::new(1.0, 0.01).unwrap();
        let cu = LinkParams::new(4.0, 2.0, 0.1).unwrap();
        let eu = LinkParams::new(10.0, 2.0, 0.1).unwrap();
        assert_eq!(pair_cost(cu, eu, &params).unwrap(), f64::INFINITY);
    }
}
