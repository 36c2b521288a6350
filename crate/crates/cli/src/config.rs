//! Run configuration: one TOML document per invocation. Unknown keys are
//! rejected.

use std::path::Path;

use g3m_core::market::MarketParams;
use g3m_core::mc::McMode;
use g3m_core::pool::{PoolState, PriceVector};
use g3m_core::replication::{naked_option_offsets, BsParams, OptionKind, PayoffSpec};
use g3m_core::schedule::WeightSchedule;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub market: Option<MarketConfig>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub scenario: Vec<ScenarioConfig>,
    pub simulate: Option<SimulateConfig>,
    pub replicate: Option<ReplicateConfig>,
    pub figure: Option<FigureConfig>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(default)]
    pub r: f64,
    pub sigma: Vec<f64>,
    /// Identity when omitted.
    pub corr: Option<Vec<Vec<f64>>>,
}

impl MarketConfig {
    pub fn build(&self, field: &str) -> Result<MarketParams, CliError> {
        let result = match &self.corr {
            Some(c) => MarketParams::new(self.r, self.sigma.clone(), c.clone()),
            None => MarketParams::independent(self.r, self.sigma.clone()),
        };
        result.map_err(|e| CliError::from_core(e).context(field))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_mc_steps")]
    pub steps: usize,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub antithetic: bool,
    /// Quadrature panels for time-varying drag.
    #[serde(default = "default_panels")]
    pub panels: usize,
}

fn default_paths() -> usize {
    20_000
}
fn default_mc_steps() -> usize {
    1
}
fn default_mode() -> String {
    "closed-payoff".into()
}
fn default_panels() -> usize {
    1000
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            steps: default_mc_steps(),
            mode: default_mode(),
            antithetic: false,
            panels: default_panels(),
        }
    }
}

impl McSection {
    pub fn mode(&self) -> Result<McMode, CliError> {
        self.mode
            .parse()
            .map_err(|e| CliError::from_core(e).context("mc.mode"))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleConfig {
    Constant {
        weights: Vec<f64>,
    },
    Linear {
        start: Vec<f64>,
        end: Vec<f64>,
        t_start: Option<f64>,
        t_end: Option<f64>,
    },
    Table {
        times: Vec<f64>,
        weights: Vec<Vec<f64>>,
    },
}

impl ScheduleConfig {
    /// `horizon` closes a linear window left open.
    pub fn build(&self, horizon: f64, field: &str) -> Result<WeightSchedule, CliError> {
        let result = match self {
            Self::Constant { weights } => WeightSchedule::constant(weights.clone()),
            Self::Linear {
                start,
                end,
                t_start,
                t_end,
            } => WeightSchedule::linear(
                start.clone(),
                end.clone(),
                t_start.unwrap_or(0.0),
                t_end.unwrap_or(horizon),
            ),
            Self::Table { times, weights } => WeightSchedule::table(times.clone(), weights.clone()),
        };
        result.map_err(|e| CliError::from_core(e).context(field))
    }
}

/// A pool given either by explicit reserves or by its value at the
/// no-arbitrage allocation.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub weights: Option<Vec<f64>>,
    pub reserves: Option<Vec<f64>>,
    pub value: Option<f64>,
    pub prices: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub market: Option<MarketConfig>,
    pub schedule: Option<ScheduleConfig>,
}

fn default_horizon() -> f64 {
    1.0
}

/// Builds a pool from `reserves` or `value`; exactly one must be present.
pub fn build_pool(
    field: &str,
    weights: Vec<f64>,
    reserves: &Option<Vec<f64>>,
    value: Option<f64>,
    prices: &PriceVector,
) -> Result<PoolState, CliError> {
    let result = match (reserves, value) {
        (Some(r), None) => PoolState::new(r.clone(), weights),
        (None, Some(g)) => PoolState::at_no_arbitrage(g, weights, prices),
        _ => {
            return Err(CliError::Validation(format!(
                "{field}: give exactly one of `reserves` or `value`"
            )))
        }
    };
    result.map_err(|e| CliError::from_core(e).context(field))
}

pub fn price_vector(prices: &[f64], field: &str) -> Result<PriceVector, CliError> {
    PriceVector::new(prices.to_vec()).map_err(|e| CliError::from_core(e).context(field))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub prices: Vec<f64>,
    pub reserves: Option<Vec<f64>>,
    pub value: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_sim_steps")]
    pub steps: usize,
    /// Which simulated path to run.
    #[serde(default)]
    pub path_index: u64,
    pub schedule: ScheduleConfig,
}

fn default_sim_steps() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffKind {
    Forward,
    Call,
    Put,
    ProtectivePut,
    CoveredCall,
    /// Naked call held as call plus discounted strike in cash.
    OffsetCall,
    Power,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateConfig {
    pub payoff: PayoffKind,
    #[serde(default = "default_strike")]
    pub strike: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default = "default_horizon")]
    pub expiry: f64,
    pub exponent: Option<f64>,
    #[serde(default = "default_strike")]
    pub s0: f64,
    /// Volatility of the simulated paths; the hedge volatility when omitted.
    pub path_sigma: Option<f64>,
    #[serde(default = "default_rep_paths")]
    pub paths: usize,
    #[serde(default = "default_rep_steps")]
    pub steps: usize,
    #[serde(default = "default_one")]
    pub reweight_every: usize,
    #[serde(default = "default_grid_points")]
    pub check_points: usize,
}

fn default_strike() -> f64 {
    100.0
}
fn default_sigma() -> f64 {
    0.2
}
fn default_rep_paths() -> usize {
    200
}
fn default_rep_steps() -> usize {
    2000
}
fn default_one() -> usize {
    1
}
fn default_grid_points() -> usize {
    41
}

impl ReplicateConfig {
    pub fn spec(&self) -> Result<PayoffSpec, CliError> {
        let bs = || {
            BsParams::new(self.r, self.sigma, self.strike, self.expiry)
                .map_err(|e| CliError::from_core(e).context("replicate"))
        };
        let core = |r: g3m_core::Result<PayoffSpec>| r.map_err(|e| CliError::from_core(e).context("replicate"));
        Ok(match self.payoff {
            PayoffKind::Forward => core(PayoffSpec::forward(self.strike, self.r, self.expiry))?,
            PayoffKind::Call => PayoffSpec::Call(bs()?),
            PayoffKind::Put => PayoffSpec::Put(bs()?),
            PayoffKind::ProtectivePut => PayoffSpec::ProtectivePut(bs()?),
            PayoffKind::CoveredCall => PayoffSpec::CoveredCall(bs()?),
            PayoffKind::OffsetCall => naked_option_offsets(OptionKind::Call, &bs()?).lp_spec,
            PayoffKind::Power => {
                let e = self.exponent.ok_or_else(|| {
                    CliError::Validation("replicate.exponent: required for power payoffs".into())
                })?;
                core(PayoffSpec::power(e, 1.0))?
            }
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    pub sigma_a: Option<f64>,
    pub sigma_b: Option<f64>,
    pub tau: Option<f64>,
    pub w_grid: Option<Vec<f64>>,
    pub rho_grid: Option<Vec<f64>>,
    /// `rho` (default) sweeps correlation, `sigma` sweeps `sigma_a` at zero
    /// correlation.
    pub panel: Option<String>,
    pub sigma_grid: Option<Vec<f64>>,
    pub strike: Option<f64>,
    pub sigma: Option<f64>,
    pub x_grid: Option<Vec<f64>>,
    pub tau_grid: Option<Vec<f64>>,
}
