//! Experiment runners behind the `harq-noma` binary.
//!
//! Each runner maps a validated [`ScenarioConfig`] and a seed to a [`Table`].
//! Sweep points are evaluated on the current rayon pool and collected in
//! sweep order, so the output does not depend on the thread count.

pub mod config;

use std::fmt::Write as _;

use anyhow::{Context, Result};
use harq_noma::monte_carlo::{simulate_user1_outage, simulate_user2_outage};
use harq_noma::outage::{user1_outage_closed, user2_outage_closed, User1OutageInput, User2OutageInput};
use harq_noma::pairing::{cost_matrix, permutation_oracle, sample_placement, swap_matching, PairCostParams};
use harq_noma::sca::{epa_baseline, grid_oracle, min_rounds, optimize, ScaParams};
use harq_noma::{Error, PowerSchedule, QosSpec};
use rayon::prelude::*;

pub use config::{ConfigError, Mode, ScenarioConfig};
use config::OutageUser;

pub const STATUS_OK: &str = "ok";
pub const STATUS_INFEASIBLE: &str = "infeasible";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn opt(v: Option<f64>) -> Cell {
        Cell::Num(v.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str], rows: Vec<Vec<Cell>>) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows }
    }

    /// CSV with a header row and `\n` line endings. Numbers use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = match cell {
                    Cell::Num(v) => write!(out, "{v}"),
                    Cell::Int(v) => write!(out, "{v}"),
                    Cell::Text(s) => write!(out, "{s}"),
                };
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Outage,
    Power,
    Pair,
    Rounds,
}

impl Command {
    pub fn mode(self) -> Mode {
        match self {
            Command::Outage => Mode::OutageValidation,
            Command::Power => Mode::TwoUser,
            Command::Pair => Mode::MultiUser,
            Command::Rounds => Mode::Rounds,
        }
    }
}

/// Parses `config_text` and runs `command` on a pool of `threads` workers
/// (rayon's default when `None`). `seed` overrides `system.rng_seed`.
pub fn run(command: Command, config_text: &str, seed: Option<u64>, threads: Option<usize>) -> Result<String> {
    let cfg = ScenarioConfig::parse(config_text)?;
    if cfg.mode != command.mode() {
        anyhow::bail!(
            "config mode is {} but this command needs {}",
            cfg.mode.name(),
            command.mode().name()
        );
    }
    let seed = seed.unwrap_or(cfg.system.rng_seed);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building the worker pool")?;
    let table = pool.install(|| match command {
        Command::Outage => run_outage_validation(&cfg, seed),
        Command::Power => run_power_sweep(&cfg),
        Command::Pair => run_pairing(&cfg, seed),
        Command::Rounds => run_min_rounds(&cfg),
    })?;
    Ok(table.to_csv())
}

fn sca_params(cfg: &ScenarioConfig, rounds: usize, delta: Option<f64>) -> Result<ScaParams> {
    let (u1, u2) = (cfg.user1(), cfg.user2());
    let link1 = cfg.link(u1.distance.context("user1 distance")?)?;
    let link2 = cfg.link(u2.distance.context("user2 distance")?)?;
    let qos1 = QosSpec::new(u1.target_snr, delta.unwrap_or(u1.max_outage))?;
    let qos2 = QosSpec::new(u2.target_snr, delta.unwrap_or(u2.max_outage))?;
    let mut p = ScaParams::new(rounds, link1, link2, qos1, qos2, cfg.system.p_max)?;
    p.tolerance = cfg.system.sca_tolerance;
    p.stehfest_m = cfg.system.stehfest_m;
    p.chebyshev_n = cfg.system.chebyshev_n;
    p.validate()?;
    Ok(p)
}

/// Closed form against Monte Carlo for one user over a `gamma` or `rho` sweep.
/// Columns: `gamma|rho, closed_form, mc_estimate, mc_stderr`.
pub fn run_outage_validation(cfg: &ScenarioConfig, seed: u64) -> Result<Table> {
    let o = cfg.outage.as_ref().context("[outage] section")?;
    let (u1, u2) = (cfg.user1(), cfg.user2());
    let by_rho = cfg.sweep.parameter == "rho";
    let rows = cfg
        .sweep
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &v)| -> Result<Vec<Cell>> {
            let scale = if by_rho { v * cfg.channel.noise_power } else { 1.0 };
            let schedule = PowerSchedule::new(
                o.p1.iter().map(|p| p * scale).collect(),
                o.p2.iter().map(|p| p * scale).collect(),
            )?;
            let point_seed = seed.wrapping_add(i as u64);
            let trials = cfg.system.mc_trials;
            let (closed, mc) = match o.user {
                OutageUser::Weak => {
                    let gamma1 = if by_rho { u1.target_snr } else { v };
                    let gain = cfg.link(u1.distance.context("user1 distance")?)?.gain();
                    let input = User1OutageInput::new(
                        schedule.clone(),
                        gain,
                        gamma1,
                        cfg.system.chebyshev_n,
                        cfg.system.stehfest_m,
                    )?;
                    let closed = user1_outage_closed(&input)?.value;
                    (closed, simulate_user1_outage(&schedule, gain, gamma1, trials, point_seed)?)
                }
                OutageUser::Strong => {
                    let gamma2 = if by_rho { u2.target_snr } else { v };
                    let gain = cfg.link(u2.distance.context("user2 distance")?)?.gain();
                    let input = User2OutageInput::new(schedule.p2().to_vec(), gain, gamma2, cfg.system.stehfest_m)?;
                    let closed = user2_outage_closed(&input)?.value;
                    let mc = simulate_user2_outage(&schedule, gain, u1.target_snr, gamma2, trials, point_seed)?;
                    (closed, mc)
                }
            };
            Ok(vec![Cell::Num(v), Cell::Num(closed), Cell::Num(mc.estimate), Cell::Num(mc.stderr)])
        })
        .collect::<Result<Vec<_>>>()?;
    let first = if by_rho { "rho" } else { "gamma" };
    Ok(Table::new(&[first, "closed_form", "mc_estimate", "mc_stderr"], rows))
}

/// SCA, grid oracle (`T <= 2`) and equal-power baseline over a `delta` or
/// `rounds` sweep. Columns: `delta, rounds, sca_power, grid_power, epa_power, status`.
pub fn run_power_sweep(cfg: &ScenarioConfig) -> Result<Table> {
    let power = cfg.power.as_ref().context("[power] section")?;
    let points: Vec<(Option<f64>, usize)> = match cfg.sweep.parameter.as_str() {
        "delta" => {
            let t = power.rounds.context("power.rounds")?;
            cfg.sweep.grid.iter().map(|&d| (Some(d), t)).collect()
        }
        _ => cfg.sweep.grid.iter().map(|&t| (None, t as usize)).collect(),
    };
    let rows = points
        .par_iter()
        .map(|&(delta, rounds)| -> Result<Vec<Cell>> {
            let params = sca_params(cfg, rounds, delta)?;
            let delta_col = Cell::Num(params.delta2());
            let Some(outcome) = optimize(&params)? else {
                return Ok(vec![
                    delta_col,
                    Cell::Int(rounds as u64),
                    Cell::Num(f64::NAN),
                    Cell::Num(f64::NAN),
                    Cell::Num(f64::NAN),
                    Cell::Text(STATUS_INFEASIBLE.into()),
                ]);
            };
            let grid = if rounds <= 2 && power.grid_levels > 0 {
                match grid_oracle(&params, power.grid_levels) {
                    Ok((_, v)) => Some(v),
                    Err(Error::NoFeasiblePoint) => None,
                    Err(e) => return Err(e.into()),
                }
            } else {
                None
            };
            let s = &outcome.schedule;
            let ratio = s.p1()[0] / s.p2()[0];
            let epa = epa_baseline(&params, ratio)?.map(|(_, v)| v);
            Ok(vec![
                delta_col,
                Cell::Int(rounds as u64),
                Cell::Num(outcome.objective),
                Cell::opt(grid),
                Cell::opt(epa),
                Cell::Text(STATUS_OK.into()),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table::new(&["delta", "rounds", "sca_power", "grid_power", "epa_power", "status"], rows))
}

/// Seed of placement `realization` for `k` pairs.
pub fn placement_seed(seed: u64, k: usize, realization: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(realization as u64)
}

/// Swap matching against the permutation oracle (`K <= 8`), averaged over
/// placements. Each pair gets `P_max / K`. Columns:
/// `K, matching_power, oracle_power, swap_count, status`.
pub fn run_pairing(cfg: &ScenarioConfig, seed: u64) -> Result<Table> {
    let p = cfg.pairing.as_ref().context("[pairing] section")?;
    let (u1, u2) = (cfg.user1(), cfg.user2());
    let mut jobs = Vec::new();
    for &kf in &cfg.sweep.grid {
        for r in 0..p.realizations {
            jobs.push((kf as usize, r));
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(k, r)| -> Result<(f64, Option<f64>, usize)> {
            let placement = sample_placement(k, p.r_c, p.r_e, placement_seed(seed, k, r))?;
            let params = PairCostParams {
                rounds: p.rounds,
                path_loss_exponent: cfg.channel.path_loss_exponent,
                noise_power: cfg.channel.noise_power,
                qos_cu: QosSpec::new(u2.target_snr, u2.max_outage)?,
                qos_eu: QosSpec::new(u1.target_snr, u1.max_outage)?,
                pair_power: cfg.system.p_max / k as f64,
                sca_tolerance: Some(cfg.system.sca_tolerance),
                sca_max_outer_iterations: None,
            };
            let costs = cost_matrix(&placement, &params)?;
            let matched = swap_matching(&costs);
            let oracle = match permutation_oracle(&costs) {
                Ok(o) => Some(o.total_cost),
                Err(Error::TooManyUsers(_)) => None,
                Err(e) => return Err(e.into()),
            };
            Ok((matched.total_cost, oracle, matched.swap_count))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = cfg
        .sweep
        .grid
        .iter()
        .zip(results.chunks(p.realizations))
        .map(|(&kf, chunk)| {
            let n = chunk.len() as f64;
            let matching = chunk.iter().map(|c| c.0).sum::<f64>() / n;
            let oracle = chunk.iter().map(|c| c.1).sum::<Option<f64>>().map(|s| s / n);
            let swaps = chunk.iter().map(|c| c.2 as f64).sum::<f64>() / n;
            let feasible = matching.is_finite();
            let status = if feasible { STATUS_OK } else { STATUS_INFEASIBLE };
            let or_nan = |v: f64| if feasible { v } else { f64::NAN };
            vec![
                Cell::Int(kf as u64),
                Cell::Num(or_nan(matching)),
                Cell::Num(or_nan(oracle.unwrap_or(f64::NAN))),
                Cell::Num(swaps),
                Cell::Text(status.into()),
            ]
        })
        .collect();
    Ok(Table::new(&["K", "matching_power", "oracle_power", "swap_count", "status"], rows))
}

/// Minimum round count per `delta`. Columns: `delta, t_hat, status`.
pub fn run_min_rounds(cfg: &ScenarioConfig) -> Result<Table> {
    let t_max = cfg.rounds.as_ref().context("[rounds] section")?.t_max;
    let rows = cfg
        .sweep
        .grid
        .par_iter()
        .map(|&delta| -> Result<Vec<Cell>> {
            let params = sca_params(cfg, 1, Some(delta))?;
            Ok(match min_rounds(&params, t_max) {
                Ok((t, _)) => vec![Cell::Num(delta), Cell::Int(t as u64), Cell::Text(STATUS_OK.into())],
                Err(Error::InfeasibleRounds(_)) => {
                    vec![Cell::Num(delta), Cell::Num(f64::NAN), Cell::Text(STATUS_INFEASIBLE.into())]
                }
                Err(e) => return Err(e.into()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table::new(&["delta", "t_hat", "status"], rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting() {
        let t = Table::new(
            &["a", "b", "c"],
            vec![
                vec![Cell::Num(0.1), Cell::Int(3), Cell::Text("ok".into())],
                vec![Cell::Num(f64::NAN), Cell::Num(1e-7), Cell::Num(2.0)],
            ],
        );
        assert_eq!(t.to_csv(), "a,b,c\n0.1,3,ok\nNaN,0.0000001,2\n");
    }

    #[test]
    fn csv_numbers_round_trip() {
        for v in [0.1 + 0.2, 1.0 / 3.0, 5.598_123_456_789_012, 1e-300, 12345678.9] {
            let s = Table::new(&["x"], vec![vec![Cell::Num(v)]]).to_csv();
            let back: f64 = s.lines().nth(1).unwrap().parse().unwrap();
            assert_eq!(back, v);
        }
    }

    #[test]
    fn placement_seeds_differ() {
        assert_ne!(placement_seed(1, 4, 0), placement_seed(1, 4, 1));
        assert_ne!(placement_seed(1, 4, 0), placement_seed(1, 5, 0));
        assert_eq!(placement_seed(7, 3, 2), placement_seed(7, 3, 2));
    }
}
