//! Closed-form LP-share prices under the risk-neutral GBM market.
//!
//! With constant weights the LP share is worth `G(t) e^η` where
//!
//! ```text
//! η = ½ [ Σ_i σ_i² (w_i² − w_i) + Σ_{i≠j} σ_i σ_j ρ_ij w_i w_j ] (T − t)
//!   = −(T − t)/2 Σ_{i<j} (σ_i² + σ_j² − 2 σ_i σ_j ρ_ij) w_i w_j ,
//! ```
//!
//! the second form holding because the weights sum to one. It shows `η ≤ 0`
//! whenever all correlations are nonnegative. Deterministic time-varying
//! weights replace `w (T − t)` by time integrals of the same integrand.

use crate::error::{G3mError, Result};
use crate::market::{ratio_volatility, MarketParams};
use crate::pool::validate_weights;
use crate::schedule::WeightSchedule;

fn check_inputs(weights: &[f64], params: &MarketParams) -> Result<()> {
    if weights.len() != params.n() {
        return Err(G3mError::DimensionMismatch {
            expected: params.n(),
            got: weights.len(),
        });
    }
    validate_weights(weights)
}

/// Instantaneous volatility drag `½[Σ σ_i²(w_i² − w_i) + Σ_{i≠j} σ_iσ_jρ_ij w_iw_j]`.
fn drag_rate(weights: &[f64], params: &MarketParams) -> f64 {
    let sigma = &params.sigma;
    let mut own = 0.0;
    let mut cross = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        own += sigma[i] * sigma[i] * (wi * wi - wi);
        for (j, wj) in weights.iter().enumerate() {
            if i != j {
                cross += sigma[i] * sigma[j] * params.corr[i][j] * wi * wj;
            }
        }
    }
    0.5 * (own + cross)
}

/// `η` for constant weights over a horizon `tau = T − t`.
pub fn eta_constant(weights: &[f64], params: &MarketParams, tau: f64) -> Result<f64> {
    check_inputs(weights, params)?;
    Ok(drag_rate(weights, params) * tau)
}

/// `η` through the pairwise ratio-variance form.
pub fn eta_pairwise(weights: &[f64], params: &MarketParams, tau: f64) -> Result<f64> {
    check_inputs(weights, params)?;
    let sigma = &params.sigma;
    let mut sum = 0.0;
    for i in 0..weights.len() {
        for j in (i + 1)..weights.len() {
            let ratio_var =
                sigma[i] * sigma[i] + sigma[j] * sigma[j] - 2.0 * sigma[i] * sigma[j] * params.corr[i][j];
            sum += ratio_var * weights[i] * weights[j];
        }
    }
    Ok(-0.5 * tau * sum)
}

/// `η` of an equal-weight two-asset pool: `−σ_r² τ / 8`.
pub fn eta_uniswap(sigma_a: f64, sigma_b: f64, rho: f64, tau: f64) -> Result<f64> {
    let params = MarketParams::pair(0.0, sigma_a, sigma_b, rho)?;
    let sr = ratio_volatility(&params, 0, 1)?;
    Ok(-sr * sr * tau / 8.0)
}

/// No-arbitrage LP price `g_t e^η`.
pub fn lp_price_constant(g_t: f64, eta: f64) -> f64 {
    g_t * eta.exp()
}

/// Discounted expected value of the frictionless constant-mix portfolio with
/// the LP's weights, `e^{−η} f = g_t`.
pub fn constant_mix_value(g_t: f64, eta: f64) -> f64 {
    (-eta).exp() * lp_price_constant(g_t, eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaReport {
    pub eta: f64,
    pub lp_price: f64,
    pub constant_mix_value: f64,
    pub horizon: f64,
}

impl EtaReport {
    pub fn constant_weight(
        g_t: f64,
        weights: &[f64],
        params: &MarketParams,
        horizon: f64,
    ) -> Result<Self> {
        let eta = eta_constant(weights, params, horizon)?;
        Ok(Self {
            eta,
            lp_price: lp_price_constant(g_t, eta),
            constant_mix_value: constant_mix_value(g_t, eta),
            horizon,
        })
    }

    /// LP price over constant-mix value, `e^η`.
    pub fn lp_to_constant_mix(&self) -> f64 {
        self.lp_price / self.constant_mix_value
    }
}

/// `η(t, T)` for a deterministic schedule by the composite midpoint rule
/// with `quad_steps` panels.
pub fn eta_time_varying(
    schedule: &WeightSchedule,
    params: &MarketParams,
    t: f64,
    t_end: f64,
    quad_steps: usize,
) -> Result<f64> {
    if !schedule.is_deterministic() {
        return Err(G3mError::Schedule(
            "time-varying η needs a deterministic schedule".into(),
        ));
    }
    if !(t_end > t) || quad_steps == 0 {
        return Err(G3mError::InvalidGrid(format!(
            "need T > t and at least one panel, got t={t}, T={t_end}, panels={quad_steps}"
        )));
    }
    let h = (t_end - t) / quad_steps as f64;
    let mut sum = 0.0;
    for k in 0..quad_steps {
        let w = schedule.eval_deterministic(t + (k as f64 + 0.5) * h)?;
        check_inputs(&w, params)?;
        sum += drag_rate(&w, params);
    }
    Ok(sum * h)
}

/// First and second derivative of the LP price in one asset price, at fixed
/// `V` and other prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpGreeks {
    pub delta: f64,
    pub gamma: f64,
}

pub fn lp_greeks(f: f64, w_i: f64, s_i: f64) -> LpGreeks {
    LpGreeks {
        delta: w_i * f / s_i,
        gamma: w_i * (w_i - 1.0) * f / (s_i * s_i),
    }
}

/// One point of an η surface: weight of the first asset, the varied
/// parameter (correlation or first-asset volatility), and η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPoint {
    pub w: f64,
    pub rho_or_sigma: f64,
    pub eta: f64,
}

/// η of a two-asset pool over a correlation × weight grid, row-major in
/// correlation.
pub fn fig1_surface(
    sigma_a: f64,
    sigma_b: f64,
    rho_grid: &[f64],
    w_grid: &[f64],
    tau: f64,
) -> Result<Vec<EtaPoint>> {
    let mut out = Vec::with_capacity(rho_grid.len() * w_grid.len());
    for &rho in rho_grid {
        let params = MarketParams::pair(0.0, sigma_a, sigma_b, rho)?;
        for &w in w_grid {
            out.push(EtaPoint {
                w,
                rho_or_sigma: rho,
                eta: eta_constant(&[w, 1.0 - w], &params, tau)?,
            });
        }
    }
    Ok(out)
}

/// η of an uncorrelated two-asset pool over a first-asset volatility ×
/// weight grid, row-major in volatility.
pub fn fig1_sigma_surface(
    sigma_grid: &[f64],
    sigma_b: f64,
    w_grid: &[f64],
    tau: f64,
) -> Result<Vec<EtaPoint>> {
    let mut out = Vec::with_capacity(sigma_grid.len() * w_grid.len());
    for &sigma_a in sigma_grid {
        let params = MarketParams::pair(0.0, sigma_a, sigma_b, 0.0)?;
        for &w in w_grid {
            out.push(EtaPoint {
                w,
                rho_or_sigma: sigma_a,
                eta: eta_constant(&[w, 1.0 - w], &params, tau)?,
            });
        }
    }
    Ok(out)
}
