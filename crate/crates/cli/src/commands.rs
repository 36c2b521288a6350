use g3m_core::csv::{fmt_f64, write_record};
use g3m_core::market::{simulate_paths, MarketParams, PathGrid, PathSimulator};
use g3m_core::mc::{price_dynamic_mc, price_lp_mc, McConfig};
use g3m_core::pricing::{eta_constant, eta_time_varying, fig1_sigma_surface, fig1_surface};
use g3m_core::replication::{check_replicable, protective_put_surface, replicate_along_path, write_weight_surface_csv};
use g3m_core::dynamic::simulate_reweighting_pool;
use rayon::prelude::*;

use crate::config::{build_pool, price_vector, Config, MarketConfig};
use crate::CliError;

/// Overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub clamp_weights: bool,
}

impl Overrides {
    fn seed(&self, cfg: &Config) -> u64 {
        self.seed.or(cfg.seed).unwrap_or(0)
    }
}

fn core<T>(r: g3m_core::Result<T>, field: &str) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_core(e).context(field))
}

fn market<'a>(own: &'a Option<MarketConfig>, cfg: &'a Config, field: &str) -> Result<MarketParams, CliError> {
    own.as_ref()
        .or(cfg.market.as_ref())
        .ok_or_else(|| CliError::Validation(format!("{field}: no [market] section")))?
        .build(&format!("{field}.market"))
}

pub const PRICE_HEADER: [&str; 8] = [
    "experiment",
    "closed_form",
    "mc_mean",
    "mc_stderr",
    "z_score",
    "g0",
    "eta",
    "arb_profit",
];

/// One row per scenario: discounted expected LP value in closed form and by
/// Monte Carlo, plus the pool value after arbitrage, the drag `η` and the
/// arbitrage profit needed to reach the no-arbitrage state.
pub fn price(cfg: &Config, ov: &Overrides) -> Result<Vec<u8>, CliError> {
    let mode = cfg.mc.mode()?;
    let mc = McConfig {
        n_paths: ov.paths.unwrap_or(cfg.mc.paths),
        steps: ov.steps.unwrap_or(cfg.mc.steps),
        seed: ov.seed(cfg),
        mode,
        antithetic: cfg.mc.antithetic,
    };
    if !cfg.scenario.is_empty() {
        core(mc.validate(), "mc")?;
    }
    let mut out = Vec::new();
    write_record(&mut out, &PRICE_HEADER).map_err(CliError::io)?;
    for (k, sc) in cfg.scenario.iter().enumerate() {
        let field = format!("scenario[{k}] ({})", sc.name);
        if sc.name.contains([',', '"', '\n']) {
            return Err(CliError::Validation(format!("{field}.name: must not contain commas, quotes or newlines")));
        }
        let params = market(&sc.market, cfg, &field)?;
        let prices = price_vector(&sc.prices, &format!("{field}.prices"))?;
        let schedule = sc
            .schedule
            .as_ref()
            .map(|s| s.build(sc.horizon, &format!("{field}.schedule")))
            .transpose()?;
        let weights = match (&sc.weights, &schedule) {
            (Some(w), _) => w.clone(),
            (None, Some(s)) => core(s.eval_deterministic(0.0), &field)?,
            (None, None) => return Err(CliError::Validation(format!("{field}: `weights` missing"))),
        };
        if let Some(s) = &schedule {
            if core(s.eval_deterministic(0.0), &field)? != weights {
                return Err(CliError::Validation(format!(
                    "{field}: `weights` differ from the schedule at t=0"
                )));
            }
        }
        let pool = build_pool(&field, weights.clone(), &sc.reserves, sc.value, &prices)?;
        let arb = core(pool.arbitrage_rebalance(&prices), &field)?;
        let g0 = core(arb.pool.pool_value(&prices), &field)?;
        let (eta, est) = match &schedule {
            Some(s) => (
                core(eta_time_varying(s, &params, 0.0, sc.horizon, cfg.mc.panels), &field)?,
                core(price_dynamic_mc(g0, s, &params, &prices, &mc, sc.horizon), &field)?,
            ),
            None => (
                core(eta_constant(&weights, &params, sc.horizon), &field)?,
                core(price_lp_mc(&arb.pool, &params, &prices, &mc, sc.horizon), &field)?,
            ),
        };
        let closed = g0 * eta.exp();
        write_record(
            &mut out,
            &[
                sc.name.clone(),
                fmt_f64(closed),
                fmt_f64(est.mean),
                fmt_f64(est.std_error),
                fmt_f64(est.z_score(closed)),
                fmt_f64(g0),
                fmt_f64(eta),
                fmt_f64(arb.profit),
            ],
        )
        .map_err(CliError::io)?;
    }
    Ok(out)
}

/// Trajectory of a re-weighted pool along one simulated path.
pub fn simulate(cfg: &Config, ov: &Overrides) -> Result<Vec<u8>, CliError> {
    let sc = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Validation("no [simulate] section in config".into()))?;
    let params = market(&None, cfg, "simulate")?;
    let s0 = price_vector(&sc.prices, "simulate.prices")?;
    let schedule = sc.schedule.build(sc.horizon, "simulate.schedule")?;
    let w0 = core(schedule.eval_deterministic(0.0), "simulate.schedule")?;
    let pool = build_pool("simulate", w0, &sc.reserves, sc.value, &s0)?;
    let grid = core(PathGrid::new(0.0, sc.horizon, ov.steps.unwrap_or(sc.steps)), "simulate")?;
    let sim = core(PathSimulator::new(&params, &s0, grid, ov.seed(cfg)), "simulate")?;
    let path = sim.path(sc.path_index, false);
    let traj = core(simulate_reweighting_pool(&pool, &schedule, &path), "simulate")?;
    let mut out = Vec::new();
    traj.write_csv(&mut out).map_err(CliError::io)?;
    Ok(out)
}

/// Type-7 sample quantile.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const REPLICATE_HEADER: [&str; 4] = ["path", "max_abs_error", "max_rel_error", "terminal_gap"];

/// Hedge test: per-path tracking errors, then `q10`, `q50`, `q90` rows with
/// each column's quantile.
pub fn replicate(cfg: &Config, ov: &Overrides) -> Result<Vec<u8>, CliError> {
    let rc = cfg
        .replicate
        .as_ref()
        .ok_or_else(|| CliError::Validation("no [replicate] section in config".into()))?;
    let spec = rc.spec()?;
    if !ov.clamp_weights {
        let n = rc.check_points.max(2);
        let center = if rc.strike > 0.0 { rc.strike } else { rc.s0 };
        let (lo, hi) = (center / 10.0, center * 10.0);
        let xs: Vec<f64> = (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect();
        let ts: Vec<f64> = (0..n).map(|i| rc.expiry * i as f64 / n as f64).collect();
        let violations = check_replicable(&spec, &xs, &ts);
        if !violations.is_empty() {
            let listed: Vec<String> = violations
                .iter()
                .take(10)
                .map(|v| format!("(x={}, t={}, w={})", v.x, v.t, v.weight))
                .collect();
            return Err(CliError::Numerical(format!(
                "payoff is not replicable: {} grid points have weights outside [0, 1] or undefined, e.g. {}",
                violations.len(),
                listed.join(", ")
            )));
        }
    }
    let sigma = rc.path_sigma.unwrap_or(rc.sigma);
    let params = core(MarketParams::independent(rc.r, vec![sigma]), "replicate")?;
    let s0 = price_vector(&[rc.s0], "replicate.s0")?;
    let grid = core(PathGrid::new(0.0, rc.expiry, ov.steps.unwrap_or(rc.steps)), "replicate")?;
    let n_paths = ov.paths.unwrap_or(rc.paths);
    if n_paths == 0 {
        return Err(CliError::Validation("replicate.paths: must be at least 1".into()));
    }
    let paths = core(simulate_paths(&params, &s0, grid, ov.seed(cfg), n_paths), "replicate")?;
    let reports = paths
        .par_iter()
        .map(|p| replicate_along_path(&spec, Some(rc.r), p, rc.reweight_every, ov.clamp_weights))
        .collect::<g3m_core::Result<Vec<_>>>();
    let reports = core(reports, "replicate")?;

    let mut out = Vec::new();
    write_record(&mut out, &REPLICATE_HEADER).map_err(CliError::io)?;
    let mut cols: [Vec<f64>; 3] = Default::default();
    for (i, r) in reports.iter().enumerate() {
        let vals = [r.max_abs_tracking_error, r.max_rel_tracking_error, r.signed_terminal_gap];
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(v);
        }
        let mut row = vec![i.to_string()];
        row.extend(vals.iter().map(|v| fmt_f64(*v)));
        write_record(&mut out, &row).map_err(CliError::io)?;
    }
    for c in cols.iter_mut() {
        c.sort_by(f64::total_cmp);
    }
    for (label, q) in [("q10", 0.1), ("q50", 0.5), ("q90", 0.9)] {
        let mut row = vec![label.to_string()];
        row.extend(cols.iter().map(|c| fmt_f64(quantile(c, q))));
        write_record(&mut out, &row).map_err(CliError::io)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureName {
    Eta,
    Weights,
}

fn steps_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

pub fn figure(name: FigureName, cfg: &Config) -> Result<Vec<u8>, CliError> {
    let fc = cfg.figure.clone().unwrap_or_default();
    let mut out = Vec::new();
    match name {
        FigureName::Eta => {
            let sa = fc.sigma_a.unwrap_or(0.3);
            let sb = fc.sigma_b.unwrap_or(0.2);
            let tau = fc.tau.unwrap_or(1.0);
            let w_grid = fc.w_grid.unwrap_or_else(|| steps_grid(0.0, 1.0, 20));
            let panel = fc.panel.as_deref().unwrap_or("rho");
            let (label, points) = match panel {
                "rho" => {
                    let rho = fc.rho_grid.unwrap_or_else(|| steps_grid(-1.0, 1.0, 20));
                    ("rho", core(fig1_surface(sa, sb, &rho, &w_grid, tau), "figure")?)
                }
                "sigma" => {
                    let sig = fc.sigma_grid.unwrap_or_else(|| steps_grid(0.05, 1.0, 19));
                    ("sigma_a", core(fig1_sigma_surface(&sig, sb, &w_grid, tau), "figure")?)
                }
                other => {
                    return Err(CliError::Validation(format!(
                        "figure.panel: unknown panel '{other}', expected rho or sigma"
                    )))
                }
            };
            write_record(&mut out, &["w_a", label, "eta"]).map_err(CliError::io)?;
            for p in points {
                write_record(&mut out, &[fmt_f64(p.w), fmt_f64(p.rho_or_sigma), fmt_f64(p.eta)])
                    .map_err(CliError::io)?;
            }
        }
        FigureName::Weights => {
            let strike = fc.strike.unwrap_or(100.0);
            let sigma = fc.sigma.unwrap_or(0.2);
            let xs = fc.x_grid.unwrap_or_else(|| steps_grid(50.0, 200.0, 150));
            let taus = fc.tau_grid.unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0]);
            let pts = core(protective_put_surface(strike, sigma, &xs, &taus), "figure")?;
            write_weight_surface_csv(&pts, &mut out).map_err(CliError::io)?;
        }
    }
    Ok(out)
}
