//! Dynamic weights: the discrete re-weighting recursion for `V`, its
//! continuous-time limit, and a step-by-step pool simulation that serves as
//! the oracle for both.
//!
//! Weight updates happen at the grid points of a [`PricePath`]. At grid time
//! `t_k` the pool is first arbitraged to `S(t_k)` under the old weights, then
//! the weights switch to `w(t_k)` (which moves `V`), then arbitrageurs restore
//! the no-arbitrage allocation under the new weights. Each switch from `w` to
//! `w'` costs the pool a factor `Π (w_i / w'_i)^{w'_i} ≤ 1`.

use std::io::{self, Write};

use crate::csv::fmt_f64;
use crate::error::{G3mError, Result};
use crate::market::PricePath;
use crate::pool::{payoff_closed_form, weighted_factor, PoolState, PriceVector, WEIGHT_SUM_TOL};
use crate::schedule::WeightSchedule;

/// `V` after switching weights from `w_old` to `w_new` at fixed reserves:
/// `v_prev Π R_i^{w_new_i − w_old_i}`.
pub fn discrete_v_update(v_prev: f64, reserves: &[f64], w_old: &[f64], w_new: &[f64]) -> Result<f64> {
    let n = reserves.len();
    for len in [w_old.len(), w_new.len()] {
        if len != n {
            return Err(G3mError::DimensionMismatch { expected: n, got: len });
        }
    }
    let dsum: f64 = w_new.iter().zip(w_old).map(|(a, b)| a - b).sum();
    if dsum.abs() > WEIGHT_SUM_TOL {
        return Err(G3mError::InvalidWeights(format!(
            "weight changes sum to {dsum}, expected 0"
        )));
    }
    let mut v = v_prev;
    for (i, ((r, wn), wo)) in reserves.iter().zip(w_new).zip(w_old).enumerate() {
        let dw = wn - wo;
        if dw == 0.0 {
            continue;
        }
        if !(*r > 0.0) {
            return Err(G3mError::NonPositiveReserve { asset: i });
        }
        v *= r.powf(dw);
    }
    Ok(v)
}

/// Switches `pool` to `w_new` and lets arbitrageurs restore the no-arbitrage
/// allocation at `prices`.
pub(crate) fn reweight_and_rebalance(
    pool: &PoolState,
    w_new: Vec<f64>,
    prices: &[f64],
) -> Result<PoolState> {
    if w_new.as_slice() == pool.weights() {
        return Ok(pool.clone());
    }
    for (i, (wn, r)) in w_new.iter().zip(pool.reserves()).enumerate() {
        if *wn > 0.0 && *r == 0.0 {
            // No reserves to anchor the new weight: V would collapse to zero.
            return Err(G3mError::ZeroWeight { asset: i });
        }
    }
    let v = discrete_v_update(pool.geometric_mean(), pool.reserves(), pool.weights(), &w_new)?;
    let g = payoff_closed_form(v, &w_new, prices);
    PoolState::at_no_arbitrage(g, w_new, prices)
}

/// Per-grid-point record of a re-weighted pool, taken after the step's final
/// rebalance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReweightTrajectory {
    pub times: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub reserves: Vec<Vec<f64>>,
    pub v_values: Vec<f64>,
    pub g_values: Vec<f64>,
}

impl ReweightTrajectory {
    fn with_capacity(len: usize) -> Self {
        Self {
            times: Vec::with_capacity(len),
            weights: Vec::with_capacity(len),
            reserves: Vec::with_capacity(len),
            v_values: Vec::with_capacity(len),
            g_values: Vec::with_capacity(len),
        }
    }

    fn record(&mut self, t: f64, pool: &PoolState, prices: &[f64]) -> Result<()> {
        self.times.push(t);
        self.weights.push(pool.weights().to_vec());
        self.reserves.push(pool.reserves().to_vec());
        self.v_values.push(pool.geometric_mean());
        self.g_values.push(pool.pool_value(prices)?);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_value(&self) -> f64 {
        *self.g_values.last().expect("trajectory is never empty")
    }

    /// CSV with columns `time, w_0.., r_0.., V, G`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.weights.first().map_or(0, Vec::len);
        let mut header = vec!["time".to_string()];
        header.extend((0..n).map(|i| format!("w_{i}")));
        header.extend((0..n).map(|i| format!("r_{i}")));
        header.push("V".into());
        header.push("G".into());
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![fmt_f64(self.times[k])];
            row.extend(self.weights[k].iter().map(|x| fmt_f64(*x)));
            row.extend(self.reserves[k].iter().map(|x| fmt_f64(*x)));
            row.push(fmt_f64(self.v_values[k]));
            row.push(fmt_f64(self.g_values[k]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_path_dim(pool: &PoolState, path: &PricePath) -> Result<()> {
    if path.n_assets() != pool.n() {
        return Err(G3mError::DimensionMismatch {
            expected: pool.n(),
            got: path.n_assets(),
        });
    }
    Ok(())
}

/// Mechanical simulation: at every grid point rebalance, re-weight to the
/// schedule, rebalance again.
pub fn simulate_reweighting_pool(
    pool0: &PoolState,
    schedule: &WeightSchedule,
    path: &PricePath,
) -> Result<ReweightTrajectory> {
    check_path_dim(pool0, path)?;
    let mut traj = ReweightTrajectory::with_capacity(path.steps() + 1);
    let mut pool = pool0.clone();
    for k in 0..=path.steps() {
        let t = path.time(k);
        let row = path.row(k);
        let prices = PriceVector::new(row.to_vec())?;
        pool = pool.arbitrage_rebalance(&prices)?.pool;
        let w = schedule.eval(t, Some(row))?;
        if w.len() != pool.n() {
            return Err(G3mError::DimensionMismatch {
                expected: pool.n(),
                got: w.len(),
            });
        }
        pool = reweight_and_rebalance(&pool, w, row)?;
        traj.record(t, &pool, row)?;
    }
    Ok(traj)
}

fn nonzero_weights(w: &[f64], t: f64) -> Result<()> {
    match w.iter().position(|x| *x == 0.0) {
        Some(asset) => Err(G3mError::Schedule(format!(
            "asset {asset} has zero weight at t={t}"
        ))),
        None => Ok(()),
    }
}

/// Terminal payoff from the discrete re-weighting recursion for `V`, with
/// reserves eliminated through the no-arbitrage allocation. The factor for
/// the update at `t_k` uses the old weights and the prices `S(t_k)` that
/// prevail just before the switch.
pub fn discrete_payoff(
    v0: f64,
    g0: f64,
    schedule: &WeightSchedule,
    path: &PricePath,
) -> Result<f64> {
    let t0 = path.time(0);
    let mut w_prev = schedule.eval(t0, Some(path.row(0)))?;
    if w_prev.len() != path.n_assets() {
        return Err(G3mError::DimensionMismatch {
            expected: path.n_assets(),
            got: w_prev.len(),
        });
    }
    nonzero_weights(&w_prev, t0)?;
    let g_check = payoff_closed_form(v0, &w_prev, path.row(0));
    if (g_check - g0).abs() > 1e-9 * g0 {
        return Err(G3mError::InconsistentState(format!(
            "V(0)={v0} implies G(0)={g_check}, but G(0)={g0} was given"
        )));
    }
    let mut log_v = v0.ln();
    for k in 1..=path.steps() {
        let t = path.time(k);
        let row = path.row(k);
        let w = schedule.eval(t, Some(row))?;
        nonzero_weights(&w, t)?;
        log_v += w
            .iter()
            .zip(&w_prev)
            .zip(row)
            .map(|((wn, wo), s)| (wn - wo) * (wo / s).ln())
            .sum::<f64>();
        w_prev = w;
    }
    Ok(payoff_closed_form(log_v.exp(), &w_prev, path.terminal()))
}

/// Left-endpoint sum `Σ_k Σ_i w_i(t_k) [log S_i(t_{k+1}) − log S_i(t_k)]`.
fn ito_log_return(schedule: &WeightSchedule, path: &PricePath) -> Result<f64> {
    let mut sum = 0.0;
    for k in 0..path.steps() {
        let row = path.row(k);
        let next = path.row(k + 1);
        let w = schedule.eval(path.time(k), Some(row))?;
        if w.len() != path.n_assets() {
            return Err(G3mError::DimensionMismatch {
                expected: path.n_assets(),
                got: w.len(),
            });
        }
        sum += w
            .iter()
            .zip(row.iter().zip(next))
            .map(|(w, (a, b))| w * (b / a).ln())
            .sum::<f64>();
    }
    Ok(sum)
}

/// Continuous re-weighting payoff `G(T) = G(t) exp(Σ_i ∫ w_i d log S_i)`,
/// with the integral as an Itô sum over the path grid.
pub fn continuous_payoff(g_t: f64, schedule: &WeightSchedule, path: &PricePath) -> Result<f64> {
    Ok(g_t * ito_log_return(schedule, path)?.exp())
}

/// Weighted geometric mean at `T` under continuous re-weighting.
pub fn wgm_continuous(v_t: f64, schedule: &WeightSchedule, path: &PricePath) -> Result<f64> {
    let w0 = schedule.eval(path.time(0), Some(path.initial()))?;
    let w_end = schedule.eval(path.time(path.steps()), Some(path.terminal()))?;
    let start: f64 = w0
        .iter()
        .zip(path.initial())
        .map(|(w, s)| weighted_factor(*s, *w))
        .product();
    let end: f64 = w_end
        .iter()
        .zip(path.terminal())
        .map(|(w, s)| weighted_factor(*s, *w))
        .product();
    Ok(v_t * start / end * ito_log_return(schedule, path)?.exp())
}
