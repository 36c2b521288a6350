//! Monte Carlo estimators checking the closed forms against simulated pools.
//!
//! Samples are computed in parallel but always combined in path-index order
//! with compensated summation, so results do not depend on the number of
//! worker threads.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::csv::{fmt_f64, write_record};
use crate::dynamic::{continuous_payoff, simulate_reweighting_pool};
use crate::error::{G3mError, Result};
use crate::market::{MarketParams, PathGrid, PathSimulator, PricePath};
use crate::pool::{payoff_closed_form, PoolState, PriceVector};
use crate::schedule::WeightSchedule;

pub const MIN_PATHS: usize = 100;

/// How the terminal pool value is obtained on each path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    /// Terminal value from the closed-form payoff.
    ClosedPayoff,
    /// Arbitrage rebalancing at every grid step.
    FineRebalance,
}

impl FromStr for McMode {
    type Err = G3mError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-payoff" => Ok(Self::ClosedPayoff),
            "fine-rebalance" => Ok(Self::FineRebalance),
            other => Err(G3mError::InvalidMcConfig(format!(
                "unknown mode '{other}', expected closed-payoff or fine-rebalance"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub mode: McMode,
    /// Pairs each path with its mirror; `n_paths` must then be even.
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, steps: usize, seed: u64, mode: McMode) -> Result<Self> {
        let cfg = Self {
            n_paths,
            steps,
            seed,
            mode,
            antithetic: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(G3mError::InvalidMcConfig(format!(
                "n_paths must be at least {MIN_PATHS}, got {}",
                self.n_paths
            )));
        }
        if self.steps == 0 {
            return Err(G3mError::InvalidMcConfig("steps must be at least 1".into()));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(G3mError::InvalidMcConfig(format!(
                "antithetic sampling needs an even path count, got {}",
                self.n_paths
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// `(mean − reference) / std_error`.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.mean - reference;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }

    pub fn within(&self, reference: f64, n_se: f64) -> bool {
        self.z_score(reference).abs() <= n_se
    }

    /// Sample mean and standard error of independent samples.
    pub fn from_samples(samples: &[f64], n_paths: usize) -> Self {
        let m = samples.len() as f64;
        let mean = neumaier_sum(samples.iter().copied()) / m;
        let ss = neumaier_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
        let var = if samples.len() > 1 { ss / (m - 1.0) } else { 0.0 };
        Self {
            mean,
            std_error: (var / m).sqrt(),
            n_paths,
        }
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Evaluates `f` on every simulated path and averages.
fn estimate<F>(sim: &PathSimulator, cfg: &McConfig, f: F) -> Result<McEstimate>
where
    F: Fn(&PricePath) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let samples: Vec<f64> = if cfg.antithetic {
        (0..(cfg.n_paths / 2) as u64)
            .into_par_iter()
            .map(|p| Ok(0.5 * (f(&sim.path(p, false))? + f(&sim.path(p, true))?)))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|p| f(&sim.path(p, false)))
            .collect::<Result<_>>()?
    };
    Ok(McEstimate::from_samples(&samples, cfg.n_paths))
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(G3mError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// Discounted expected terminal value of a constant-weight pool.
pub fn price_lp_mc(
    pool: &PoolState,
    params: &MarketParams,
    s0: &PriceVector,
    cfg: &McConfig,
    horizon: f64,
) -> Result<McEstimate> {
    check_horizon(horizon)?;
    if pool.n() != params.n() {
        return Err(G3mError::DimensionMismatch {
            expected: pool.n(),
            got: params.n(),
        });
    }
    if !pool.is_at_no_arbitrage(s0, 1e-9)? {
        return Err(G3mError::InconsistentState(
            "initial pool is not at its no-arbitrage allocation for s0".into(),
        ));
    }
    let grid = PathGrid::new(0.0, horizon, cfg.steps)?;
    let sim = PathSimulator::new(params, s0, grid, cfg.seed)?;
    let disc = (-params.r * horizon).exp();
    let v = pool.geometric_mean();
    match cfg.mode {
        McMode::ClosedPayoff => estimate(&sim, cfg, |path| {
            Ok(disc * payoff_closed_form(v, pool.weights(), path.terminal()))
        }),
        McMode::FineRebalance => estimate(&sim, cfg, |path| {
            let mut p = pool.clone();
            for row in path.rows().skip(1) {
                p = p.arbitrage_rebalance(&PriceVector::new(row.to_vec())?)?.pool;
            }
            Ok(disc * p.pool_value(path.terminal())?)
        }),
    }
}

/// Discounted expected terminal value under a deterministic weight schedule.
///
/// Closed-payoff mode uses the continuous re-weighting payoff; fine-rebalance
/// mode runs the mechanical pool, re-weighting at every grid step.
pub fn price_dynamic_mc(
    g0: f64,
    schedule: &WeightSchedule,
    params: &MarketParams,
    s0: &PriceVector,
    cfg: &McConfig,
    horizon: f64,
) -> Result<McEstimate> {
    check_horizon(horizon)?;
    if !schedule.is_deterministic() {
        return Err(G3mError::Schedule(
            "Monte Carlo pricing needs a deterministic schedule".into(),
        ));
    }
    if !(g0 > 0.0 && g0.is_finite()) {
        return Err(G3mError::InvalidReserves(format!("g0 must be positive, got {g0}")));
    }
    let w0 = schedule.eval_deterministic(0.0)?;
    if w0.len() != params.n() {
        return Err(G3mError::DimensionMismatch {
            expected: params.n(),
            got: w0.len(),
        });
    }
    let grid = PathGrid::new(0.0, horizon, cfg.steps)?;
    let sim = PathSimulator::new(params, s0, grid, cfg.seed)?;
    let disc = (-params.r * horizon).exp();
    match cfg.mode {
        McMode::ClosedPayoff => estimate(&sim, cfg, |path| {
            Ok(disc * continuous_payoff(g0, schedule, path)?)
        }),
        McMode::FineRebalance => {
            let pool = PoolState::at_no_arbitrage(g0, w0, s0)?;
            estimate(&sim, cfg, |path| {
                Ok(disc * simulate_reweighting_pool(&pool, schedule, path)?.terminal_value())
            })
        }
    }
}

/// Statistics estimated from a batch of simulated paths.
#[derive(Debug, Clone, PartialEq)]
pub enum RealizedStat {
    /// Annualized volatility of `log(S_a / S_b)`.
    RatioVol { a: usize, b: usize },
    /// Annualized volatility of `Σ w_i log S_i`; equal weights when `None`.
    WgmVol { weights: Option<Vec<f64>> },
    MeanTerminal { asset: usize },
}

impl FromStr for RealizedStat {
    type Err = G3mError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio-vol" => Ok(Self::RatioVol { a: 0, b: 1 }),
            "wgm-vol" => Ok(Self::WgmVol { weights: None }),
            "mean-terminal" => Ok(Self::MeanTerminal { asset: 0 }),
            other => Err(G3mError::UnknownStat(other.to_string())),
        }
    }
}

impl fmt::Display for RealizedStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RatioVol { .. } => "ratio-vol",
            Self::WgmVol { .. } => "wgm-vol",
            Self::MeanTerminal { .. } => "mean-terminal",
        })
    }
}

/// Unbiased per-path variance rate of the increments of `series`.
fn variance_rate(path: &PricePath, series: impl Fn(&[f64]) -> f64) -> f64 {
    let steps = path.steps();
    let incs: Vec<f64> = (0..steps)
        .map(|k| series(path.row(k + 1)) - series(path.row(k)))
        .collect();
    let m = steps as f64;
    let mean = neumaier_sum(incs.iter().copied()) / m;
    let ss = neumaier_sum(incs.iter().map(|d| (d - mean) * (d - mean)));
    ss / (m - 1.0) / path.grid().dt()
}

/// Pooled estimate of `stat` across `paths`. Volatilities average the
/// per-path variance rates and carry a delta-method standard error.
pub fn realized_stat(paths: &[PricePath], stat: &RealizedStat) -> Result<McEstimate> {
    if paths.len() < 2 {
        return Err(G3mError::InvalidMcConfig(format!(
            "need at least 2 paths, got {}",
            paths.len()
        )));
    }
    let n = paths[0].n_assets();
    if paths.iter().any(|p| p.n_assets() != n) {
        return Err(G3mError::InvalidMcConfig("paths differ in asset count".into()));
    }
    let asset_ok = |i: usize| {
        if i < n {
            Ok(())
        } else {
            Err(G3mError::InvalidIndex(format!("asset {i} out of range for {n} assets")))
        }
    };
    let vol_from_rates = |rates: Vec<f64>| {
        let var = McEstimate::from_samples(&rates, paths.len());
        let sigma = var.mean.max(0.0).sqrt();
        let se = if sigma > 0.0 { var.std_error / (2.0 * sigma) } else { 0.0 };
        McEstimate {
            mean: sigma,
            std_error: se,
            n_paths: paths.len(),
        }
    };
    match stat {
        RealizedStat::RatioVol { a, b } => {
            asset_ok(*a)?;
            asset_ok(*b)?;
            if a == b {
                return Err(G3mError::InvalidIndex("ratio needs two distinct assets".into()));
            }
            if paths[0].steps() < 2 {
                return Err(G3mError::InvalidGrid("volatility needs at least 2 steps".into()));
            }
            let rates = paths
                .iter()
                .map(|p| variance_rate(p, |row| (row[*a] / row[*b]).ln()))
                .collect();
            Ok(vol_from_rates(rates))
        }
        RealizedStat::WgmVol { weights } => {
            let w = weights.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
            if w.len() != n {
                return Err(G3mError::DimensionMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
            if paths[0].steps() < 2 {
                return Err(G3mError::InvalidGrid("volatility needs at least 2 steps".into()));
            }
            let rates = paths
                .iter()
                .map(|p| variance_rate(p, |row| w.iter().zip(row).map(|(w, s)| w * s.ln()).sum()))
                .collect();
            Ok(vol_from_rates(rates))
        }
        RealizedStat::MeanTerminal { asset } => {
            asset_ok(*asset)?;
            let xs: Vec<f64> = paths.iter().map(|p| p.terminal()[*asset]).collect();
            Ok(McEstimate::from_samples(&xs, paths.len()))
        }
    }
}

/// One line of an experiment report.
#[derive(Debug, Clone, PartialEq)]
pub struct McReportRow {
    pub experiment: String,
    pub closed_form: f64,
    pub estimate: McEstimate,
}

pub const MC_REPORT_HEADER: [&str; 5] = ["experiment", "closed_form", "mc_mean", "mc_stderr", "z_score"];

impl McReportRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            fmt_f64(self.closed_form),
            fmt_f64(self.estimate.mean),
            fmt_f64(self.estimate.std_error),
            fmt_f64(self.estimate.z_score(self.closed_form)),
        ]
    }
}

pub fn write_mc_report<W: Write>(rows: &[McReportRow], mut out: W) -> io::Result<()> {
    write_record(&mut out, &MC_REPORT_HEADER)?;
    for row in rows {
        write_record(&mut out, &row.fields())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::simulate_paths;
    use crate::pricing::{eta_constant, eta_time_varying};

    fn s0(p: &[f64]) -> PriceVector {
        PriceVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(99, 1, 0, McMode::ClosedPayoff).is_err());
        assert!(McConfig::new(100, 0, 0, McMode::ClosedPayoff).is_err());
        let mut c = McConfig::new(101, 1, 0, McMode::ClosedPayoff).unwrap();
        c.antithetic = true;
        assert!(c.validate().is_err());
        assert_eq!("fine-rebalance".parse::<McMode>().unwrap(), McMode::FineRebalance);
        assert!("fine".parse::<McMode>().is_err());
    }

    #[test]
    fn neumaier_beats_naive() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(xs), 2.0);
    }

    #[test]
    fn tiny_volatility_returns_pool_value() {
        let params = MarketParams::pair(0.05, 1e-9, 1e-9, 0.0).unwrap();
        let s = s0(&[1.0, 2.0]);
        let pool = PoolState::at_no_arbitrage(10.0, vec![0.5, 0.5], &s).unwrap();
        let cfg = McConfig::new(200, 4, 1, McMode::ClosedPayoff).unwrap();
        let est = price_lp_mc(&pool, &params, &s, &cfg, 1.0).unwrap();
        assert!((est.mean - 10.0).abs() < 1e-6);
    }

    #[test]
    fn uniswap_matches_closed_form() {
        let params = MarketParams::pair(0.0, 0.3, 0.2, 0.0).unwrap();
        let s = s0(&[1.0, 1.0]);
        let pool = PoolState::at_no_arbitrage(1.0, vec![0.5, 0.5], &s).unwrap();
        let cfg = McConfig::new(20_000, 1, 7, McMode::ClosedPayoff).unwrap();
        let est = price_lp_mc(&pool, &params, &s, &cfg, 1.0).unwrap();
        assert!(est.within((-0.01625f64).exp(), 3.0), "{est:?}");
    }

    #[test]
    fn modes_agree_pathwise() {
        let params = MarketParams::pair(0.03, 0.4, 0.25, 0.2).unwrap();
        let s = s0(&[2.0, 1.0]);
        let pool = PoolState::at_no_arbitrage(5.0, vec![0.3, 0.7], &s).unwrap();
        let closed = McConfig::new(500, 20, 3, McMode::ClosedPayoff).unwrap();
        let fine = McConfig {
            mode: McMode::FineRebalance,
            ..closed
        };
        let a = price_lp_mc(&pool, &params, &s, &closed, 1.0).unwrap();
        let b = price_lp_mc(&pool, &params, &s, &fine, 1.0).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-10 * a.mean);
    }

    #[test]
    fn off_balance_pool_is_rejected() {
        let params = MarketParams::pair(0.0, 0.3, 0.2, 0.0).unwrap();
        let pool = PoolState::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let cfg = McConfig::new(100, 1, 0, McMode::ClosedPayoff).unwrap();
        assert!(matches!(
            price_lp_mc(&pool, &params, &s0(&[1.0, 2.0]), &cfg, 1.0),
            Err(G3mError::InconsistentState(_))
        ));
    }

    #[test]
    fn antithetic_is_unbiased() {
        let params = MarketParams::pair(0.0, 0.3, 0.2, 0.0).unwrap();
        let s = s0(&[1.0, 1.0]);
        let pool = PoolState::at_no_arbitrage(1.0, vec![0.5, 0.5], &s).unwrap();
        let mut cfg = McConfig::new(10_000, 1, 11, McMode::ClosedPayoff).unwrap();
        cfg.antithetic = true;
        let est = price_lp_mc(&pool, &params, &s, &cfg, 1.0).unwrap();
        assert!(est.within((-0.01625f64).exp(), 3.0));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let params = MarketParams::pair(0.01, 0.3, 0.2, 0.1).unwrap();
        let s = s0(&[1.0, 1.0]);
        let pool = PoolState::at_no_arbitrage(1.0, vec![0.4, 0.6], &s).unwrap();
        let cfg = McConfig::new(3000, 8, 5, McMode::FineRebalance).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| price_lp_mc(&pool, &params, &s, &cfg, 1.0).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
        assert_eq!(one.std_error.to_bits(), four.std_error.to_bits());
    }

    #[test]
    fn dynamic_constant_schedule_matches_constant_pricing() {
        let params = MarketParams::pair(0.0, 0.3, 0.2, 0.0).unwrap();
        let s = s0(&[1.0, 1.0]);
        let schedule = WeightSchedule::constant(vec![0.5, 0.5]).unwrap();
        let cfg = McConfig::new(2000, 4, 9, McMode::ClosedPayoff).unwrap();
        let dynamic = price_dynamic_mc(1.0, &schedule, &params, &s, &cfg, 1.0).unwrap();
        let pool = PoolState::at_no_arbitrage(1.0, vec![0.5, 0.5], &s).unwrap();
        let constant = price_lp_mc(&pool, &params, &s, &cfg, 1.0).unwrap();
        assert!((dynamic.mean - constant.mean).abs() < 1e-12);
    }

    #[test]
    fn dynamic_linear_schedule_matches_eta() {
        let params = MarketParams::pair(0.0, 0.3, 0.2, 0.0).unwrap();
        let s = s0(&[1.0, 1.0]);
        let schedule = WeightSchedule::linear(vec![1.0, 0.0], vec![0.0, 1.0], 0.0, 1.0).unwrap();
        let eta = eta_time_varying(&schedule, &params, 0.0, 1.0, 1000).unwrap();
        let cfg = McConfig::new(20_000, 50, 2, McMode::ClosedPayoff).unwrap();
        let est = price_dynamic_mc(1.0, &schedule, &params, &s, &cfg, 1.0).unwrap();
        assert!(est.within(eta.exp(), 3.0), "{est:?} vs {}", eta.exp());
    }

    #[test]
    fn perfectly_correlated_identical_assets_have_no_drag() {
        let params = MarketParams::pair(0.0, 0.25, 0.25, 1.0).unwrap();
        let s = s0(&[1.0, 3.0]);
        let schedule = WeightSchedule::linear(vec![0.9, 0.1], vec![0.2, 0.8], 0.0, 1.0).unwrap();
        let cfg = McConfig::new(5000, 20, 4, McMode::ClosedPayoff).unwrap();
        let est = price_dynamic_mc(2.0, &schedule, &params, &s, &cfg, 1.0).unwrap();
        assert!(est.within(2.0, 3.0), "{est:?}");
    }

    #[test]
    fn dynamic_rejects_state_dependent_schedule() {
        let params = MarketParams::pair(0.0, 0.3, 0.2, 0.0).unwrap();
        let schedule = WeightSchedule::state_dependent(|_, _| vec![0.5, 0.5]);
        let cfg = McConfig::new(100, 1, 0, McMode::ClosedPayoff).unwrap();
        assert!(price_dynamic_mc(1.0, &schedule, &params, &s0(&[1.0, 1.0]), &cfg, 1.0).is_err());
    }

    #[test]
    fn supermartingale_for_nonnegative_correlation() {
        let params = MarketParams::pair(0.0, 0.5, 0.1, 0.3).unwrap();
        let s = s0(&[1.0, 1.0]);
        let pool = PoolState::at_no_arbitrage(1.0, vec![0.6, 0.4], &s).unwrap();
        let cfg = McConfig::new(5000, 1, 8, McMode::ClosedPayoff).unwrap();
        let est = price_lp_mc(&pool, &params, &s, &cfg, 1.0).unwrap();
        assert!(est.mean <= 1.0 + 3.0 * est.std_error);
        let eta = eta_constant(&[0.6, 0.4], &params, 1.0).unwrap();
        assert!(est.within(eta.exp(), 3.0));
    }

    #[test]
    fn realized_stats() {
        let params = MarketParams::pair(0.02, 0.3, 0.2, 0.4).unwrap();
        let grid = PathGrid::new(0.0, 1.0, 100).unwrap();
        let s = s0(&[1.0, 2.0]);
        let paths = simulate_paths(&params, &s, grid, 12, 400).unwrap();
        let rv = realized_stat(&paths, &RealizedStat::RatioVol { a: 0, b: 1 }).unwrap();
        let expected = crate::market::ratio_volatility(&params, 0, 1).unwrap();
        assert!(rv.within(expected, 3.0), "{rv:?} vs {expected}");
        let wv = realized_stat(&paths, &RealizedStat::WgmVol { weights: Some(vec![0.3, 0.7]) }).unwrap();
        let expected = crate::market::portfolio_volatility(&[0.3, 0.7], &params).unwrap();
        assert!(wv.within(expected, 3.0), "{wv:?} vs {expected}");
        let mt = realized_stat(&paths, &RealizedStat::MeanTerminal { asset: 1 }).unwrap();
        assert!(mt.within(2.0 * 0.02f64.exp(), 3.0));
        assert!(matches!("nope".parse::<RealizedStat>(), Err(G3mError::UnknownStat(_))));
        assert!(realized_stat(&paths[..1], &RealizedStat::MeanTerminal { asset: 0 }).is_err());
    }

    #[test]
    fn report_csv() {
        let rows = [McReportRow {
            experiment: "x".into(),
            closed_form: 1.0,
            estimate: McEstimate {
                mean: 1.5,
                std_error: 0.25,
                n_paths: 100,
            },
        }];
        let mut buf = Vec::new();
        write_mc_report(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,closed_form,mc_mean,mc_stderr,z_score\nx,1,1.5,0.25,2\n"
        );
    }
}
