//! Scenario files.
//!
//! A scenario is a TOML document with one table per concern. Unknown keys are
//! rejected so typos surface as errors instead of silently using defaults.
//!
//! ```toml
//! mode = "two_user"
//!
//! [system]
//! p_max = 40.0
//!
//! [user1]
//! distance = 10.0
//! target_snr = 0.2
//! max_outage = 0.1
//!
//! [user2]
//! distance = 4.0
//! target_snr = 1.0
//! max_outage = 0.1
//!
//! [power]
//! rounds = 3
//!
//! [sweep]
//! parameter = "delta"
//! grid = [0.01, 0.05, 0.1]
//! ```

use std::fmt;

use harq_noma::{LinkParams, QosSpec, SystemConfig};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    /// 1-based line of the offending key, when it can be located.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TwoUser,
    MultiUser,
    OutageValidation,
    Rounds,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::TwoUser => "two_user",
            Mode::MultiUser => "multi_user",
            Mode::OutageValidation => "outage_validation",
            Mode::Rounds => "rounds",
        }
    }

    fn sweep_parameters(self) -> &'static [&'static str] {
        match self {
            Mode::TwoUser => &["delta", "rounds"],
            Mode::MultiUser => &["users"],
            Mode::OutageValidation => &["gamma", "rho"],
            Mode::Rounds => &["delta"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub p_max: f64,
    pub sca_tolerance: f64,
    pub mc_trials: u64,
    pub rng_seed: u64,
    pub chebyshev_n: usize,
    pub stehfest_m: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        let d = SystemConfig::default();
        Self {
            p_max: d.p_max,
            sca_tolerance: d.sca_tolerance,
            mc_trials: d.mc_trials,
            rng_seed: d.rng_seed,
            chebyshev_n: d.chebyshev_n,
            stehfest_m: d.stehfest_m,
        }
    }
}

impl SystemSection {
    pub fn to_system(&self) -> SystemConfig {
        SystemConfig {
            p_max: self.p_max,
            sca_tolerance: self.sca_tolerance,
            mc_trials: self.mc_trials,
            rng_seed: self.rng_seed,
            chebyshev_n: self.chebyshev_n,
            stehfest_m: self.stehfest_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub path_loss_exponent: f64,
    pub noise_power: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { path_loss_exponent: 2.0, noise_power: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    pub distance: Option<f64>,
    pub target_snr: f64,
    pub max_outage: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageUser {
    Weak,
    Strong,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageSection {
    pub user: OutageUser,
    /// Per-round powers in Watt for a `gamma` sweep. For a `rho` sweep they
    /// are fractions and round powers are `fraction · rho · noise_power`.
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    /// Round count for a `delta` sweep.
    pub rounds: Option<usize>,
    /// Grid-oracle resolution for `T <= 2`; 0 disables it.
    #[serde(default = "default_grid_levels")]
    pub grid_levels: usize,
}

fn default_grid_levels() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingSection {
    pub r_c: f64,
    pub r_e: f64,
    pub rounds: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn default_realizations() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundsSection {
    pub t_max: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub channel: ChannelSection,
    pub user1: Option<UserSection>,
    pub user2: Option<UserSection>,
    pub sweep: SweepSection,
    pub outage: Option<OutageSection>,
    pub power: Option<PowerSection>,
    pub pairing: Option<PairingSection>,
    pub rounds: Option<RoundsSection>,
}

/// Line of `key = …` inside `[section]` (top level when `section` is empty).
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail<T>(&self, section: &str, key: &str, message: impl Into<String>) -> Result<T, ConfigError> {
        let line = line_of(self.text, section, key).or_else(|| line_of(self.text, section, ""));
        Err(ConfigError { line, message: message.into() })
    }

    fn require<'b, T>(&self, value: &'b Option<T>, section: &str) -> Result<&'b T, ConfigError> {
        match value {
            Some(v) => Ok(v),
            None => self.fail("", "mode", format!("[{section}] is required in this mode")),
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a scenario file.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError { line, message: e.message().trim().to_string() }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let c = Checker { text };
        if let Err(e) = self.system.to_system().validate() {
            return c.fail("system", "", e.to_string());
        }
        if let Err(e) = LinkParams::new(1.0, self.channel.path_loss_exponent, self.channel.noise_power) {
            return c.fail("channel", "", e.to_string());
        }
        for (name, user) in [("user1", &self.user1), ("user2", &self.user2)] {
            if let Some(u) = user {
                if let Err(e) = QosSpec::new(u.target_snr, u.max_outage) {
                    return c.fail(name, "", e.to_string());
                }
                if let Some(d) = u.distance {
                    if !(d >= 0.0 && d.is_finite()) {
                        return c.fail(name, "distance", format!("distance {d} must be >= 0"));
                    }
                }
            }
        }

        let allowed = self.mode.sweep_parameters();
        if !allowed.contains(&self.sweep.parameter.as_str()) {
            return c.fail(
                "sweep",
                "parameter",
                format!(
                    "sweep parameter {:?} is not valid for mode {}; expected one of {allowed:?}",
                    self.sweep.parameter,
                    self.mode.name()
                ),
            );
        }
        let grid = &self.sweep.grid;
        if grid.is_empty() {
            return c.fail("sweep", "grid", "sweep grid is empty");
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return c.fail("sweep", "grid", "sweep grid values must be finite");
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return c.fail("sweep", "grid", "sweep grid must be strictly increasing");
        }
        let integral = matches!(self.sweep.parameter.as_str(), "rounds" | "users");
        if integral && grid.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return c.fail("sweep", "grid", format!("{} grid must hold integers >= 1", self.sweep.parameter));
        }
        if self.sweep.parameter == "delta" && grid.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return c.fail("sweep", "grid", "delta grid values must lie in (0, 1)");
        }
        if matches!(self.sweep.parameter.as_str(), "gamma" | "rho") && grid.iter().any(|&v| v <= 0.0) {
            return c.fail("sweep", "grid", format!("{} grid values must be > 0", self.sweep.parameter));
        }

        let need_distance = |name: &str, u: &UserSection| -> Result<(), ConfigError> {
            if u.distance.is_none() {
                return c.fail(name, "", format!("[{name}] needs a distance in this mode"));
            }
            Ok(())
        };
        let user1 = c.require(&self.user1, "user1")?;
        let user2 = c.require(&self.user2, "user2")?;
        match self.mode {
            Mode::TwoUser | Mode::Rounds => {
                need_distance("user1", user1)?;
                need_distance("user2", user2)?;
                let (u1, u2) = (user1.distance.unwrap(), user2.distance.unwrap());
                if u2 > u1 {
                    return c.fail("user2", "distance", "user 2 (strong) must not be farther than user 1 (weak)");
                }
            }
            Mode::OutageValidation | Mode::MultiUser => {}
        }
        match self.mode {
            Mode::TwoUser => {
                let power = c.require(&self.power, "power")?;
                if self.sweep.parameter == "delta" {
                    match power.rounds {
                        Some(t) if t >= 1 => {}
                        _ => return c.fail("power", "rounds", "a delta sweep needs rounds >= 1"),
                    }
                }
            }
            Mode::Rounds => {
                let rounds = c.require(&self.rounds, "rounds")?;
                if rounds.t_max == 0 {
                    return c.fail("rounds", "t_max", "t_max must be >= 1");
                }
            }
            Mode::MultiUser => {
                let p = c.require(&self.pairing, "pairing")?;
                if !(p.r_c > 0.0 && p.r_c < p.r_e && p.r_e.is_finite()) {
                    return c.fail("pairing", "r_e", "need 0 < r_c < r_e");
                }
                if p.rounds == 0 {
                    return c.fail("pairing", "rounds", "rounds must be >= 1");
                }
                if p.realizations == 0 {
                    return c.fail("pairing", "realizations", "realizations must be >= 1");
                }
            }
            Mode::OutageValidation => {
                let o = c.require(&self.outage, "outage")?;
                let (name, user) = match o.user {
                    OutageUser::Weak => ("user1", user1),
                    OutageUser::Strong => ("user2", user2),
                };
                need_distance(name, user)?;
                if o.p1.is_empty() || o.p1.len() != o.p2.len() {
                    return c.fail("outage", "p2", "p1 and p2 must be nonempty and of equal length");
                }
                if o.p1.iter().chain(&o.p2).any(|&p| !(p > 0.0 && p.is_finite())) {
                    return c.fail("outage", "p1", "powers must be > 0");
                }
            }
        }
        Ok(())
    }

    pub fn user1(&self) -> &UserSection {
        self.user1.as_ref().expect("validated")
    }

    pub fn user2(&self) -> &UserSection {
        self.user2.as_ref().expect("validated")
    }

    pub fn link(&self, distance: f64) -> harq_noma::Result<LinkParams> {
        LinkParams::new(distance, self.channel.path_loss_exponent, self.channel.noise_power)
    }
}
