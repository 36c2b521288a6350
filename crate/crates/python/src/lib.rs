//! Python module `g3m`: pools, drag terms, replication weights and Monte
//! Carlo pricing. Validation failures raise `ValueError`; numerical failures
//! raise `ArithmeticError`.

use g3m_core::{
    BsParams as CoreBs, G3mError, MarketParams as CoreMarket, McConfig, McEstimate as CoreEstimate,
    McMode, PoolState as CorePool, PriceVector, WeightSchedule as CoreSchedule,
};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: G3mError) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn prices(v: Vec<f64>) -> PyResult<PriceVector> {
    PriceVector::new(v).map_err(py_err)
}

/// Correlated geometric Brownian motion: drift `r`, volatilities `sigma`,
/// correlation `corr` (identity when omitted).
#[pyclass(name = "MarketParams", module = "g3m", frozen, skip_from_py_object)]
#[derive(Clone)]
struct MarketParams(CoreMarket);

#[pymethods]
impl MarketParams {
    #[new]
    #[pyo3(signature = (r, sigma, corr=None))]
    fn new(r: f64, sigma: Vec<f64>, corr: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let p = match corr {
            Some(c) => CoreMarket::new(r, sigma, c),
            None => CoreMarket::independent(r, sigma),
        };
        p.map(Self).map_err(py_err)
    }

    #[getter]
    fn r(&self) -> f64 {
        self.0.r
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.0.sigma.clone()
    }

    #[getter]
    fn corr(&self) -> Vec<Vec<f64>> {
        self.0.corr.clone()
    }

    fn __repr__(&self) -> String {
        format!("MarketParams(r={}, sigma={:?}, corr={:?})", self.0.r, self.0.sigma, self.0.corr)
    }
}

/// Pool holding `reserves` of each asset under the invariant
/// `prod(R_i ** w_i)`.
#[pyclass(name = "PoolState", module = "g3m", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PoolState(CorePool);

#[pymethods]
impl PoolState {
    #[new]
    fn new(reserves: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        CorePool::new(reserves, weights).map(Self).map_err(py_err)
    }

    /// Pool of value `g` already at its no-arbitrage allocation for `prices`.
    #[staticmethod]
    fn at_no_arbitrage(g: f64, weights: Vec<f64>, prices: Vec<f64>) -> PyResult<Self> {
        CorePool::at_no_arbitrage(g, weights, &prices).map(Self).map_err(py_err)
    }

    #[getter]
    fn reserves(&self) -> Vec<f64> {
        self.0.reserves().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    /// Invariant `V`.
    fn geometric_mean(&self) -> f64 {
        self.0.geometric_mean()
    }

    /// Pool price of asset `i` in units of asset `j`.
    fn spot_price(&self, i: usize, j: usize) -> PyResult<f64> {
        self.0.spot_price(i, j).map_err(py_err)
    }

    fn pool_value(&self, prices: Vec<f64>) -> PyResult<f64> {
        self.0.pool_value(&prices).map_err(py_err)
    }

    /// Reserve deltas of depositing `deposit` of asset `i` and withdrawing
    /// asset `j` along the invariant.
    fn pair_trade(&self, i: usize, deposit: f64, j: usize) -> PyResult<Vec<f64>> {
        self.0.pair_trade(i, deposit, j).map(|t| t.deltas).map_err(py_err)
    }

    /// Optimal arbitrage against external `prices`: `(pool, deltas, profit)`.
    fn arbitrage_rebalance(&self, prices: Vec<f64>) -> PyResult<(PoolState, Vec<f64>, f64)> {
        let out = self.0.arbitrage_rebalance(&self::prices(prices)?).map_err(py_err)?;
        Ok((Self(out.pool), out.trade.deltas, out.profit))
    }

    #[pyo3(signature = (prices, tol=1e-9))]
    fn is_at_no_arbitrage(&self, prices: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.0.is_at_no_arbitrage(&prices, tol).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("PoolState(reserves={:?}, weights={:?})", self.0.reserves(), self.0.weights())
    }
}

/// Deterministic weight path over time.
#[pyclass(name = "WeightSchedule", module = "g3m", frozen, skip_from_py_object)]
#[derive(Clone)]
struct WeightSchedule(CoreSchedule);

#[pymethods]
impl WeightSchedule {
    #[staticmethod]
    fn constant(weights: Vec<f64>) -> PyResult<Self> {
        CoreSchedule::constant(weights).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn linear(start: Vec<f64>, end: Vec<f64>, t_start: f64, t_end: f64) -> PyResult<Self> {
        CoreSchedule::linear(start, end, t_start, t_end).map(Self).map_err(py_err)
    }

    /// Piecewise-linear through the knots, flat outside them.
    #[staticmethod]
    fn table(times: Vec<f64>, weights: Vec<Vec<f64>>) -> PyResult<Self> {
        CoreSchedule::table(times, weights).map(Self).map_err(py_err)
    }

    fn __call__(&self, t: f64) -> PyResult<Vec<f64>> {
        self.0.eval_deterministic(t).map_err(py_err)
    }
}

/// Black-Scholes contract parameters.
#[pyclass(name = "BsParams", module = "g3m", frozen, skip_from_py_object)]
#[derive(Clone)]
struct BsParams(CoreBs);

#[pymethods]
impl BsParams {
    #[new]
    fn new(r: f64, sigma: f64, strike: f64, expiry: f64) -> PyResult<Self> {
        CoreBs::new(r, sigma, strike, expiry).map(Self).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!("BsParams(r={}, sigma={}, strike={}, expiry={})", p.r, p.sigma, p.strike, p.expiry)
    }
}

#[pyclass(name = "McEstimate", module = "g3m", frozen, skip_from_py_object)]
#[derive(Clone)]
struct McEstimate(CoreEstimate);

#[pymethods]
impl McEstimate {
    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean
    }

    #[getter]
    fn std_error(&self) -> f64 {
        self.0.std_error
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.0.n_paths
    }

    fn z_score(&self, reference: f64) -> f64 {
        self.0.z_score(reference)
    }

    fn __repr__(&self) -> String {
        format!(
            "McEstimate(mean={}, std_error={}, n_paths={})",
            self.0.mean, self.0.std_error, self.0.n_paths
        )
    }
}

#[pyfunction]
fn payoff_closed_form(v: f64, weights: Vec<f64>, prices: Vec<f64>) -> f64 {
    g3m_core::payoff_closed_form(v, &weights, &prices)
}

#[pyfunction]
fn eta_constant(weights: Vec<f64>, params: &MarketParams, tau: f64) -> PyResult<f64> {
    g3m_core::eta_constant(&weights, &params.0, tau).map_err(py_err)
}

#[pyfunction]
fn eta_pairwise(weights: Vec<f64>, params: &MarketParams, tau: f64) -> PyResult<f64> {
    g3m_core::eta_pairwise(&weights, &params.0, tau).map_err(py_err)
}

#[pyfunction]
fn eta_uniswap(sigma_a: f64, sigma_b: f64, rho: f64, tau: f64) -> PyResult<f64> {
    g3m_core::eta_uniswap(sigma_a, sigma_b, rho, tau).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (schedule, params, t, t_end, quad_steps=1000))]
fn eta_time_varying(
    schedule: &WeightSchedule,
    params: &MarketParams,
    t: f64,
    t_end: f64,
    quad_steps: usize,
) -> PyResult<f64> {
    g3m_core::eta_time_varying(&schedule.0, &params.0, t, t_end, quad_steps).map_err(py_err)
}

#[pyfunction]
fn lp_price_constant(g_t: f64, eta: f64) -> f64 {
    g3m_core::lp_price_constant(g_t, eta)
}

/// `(delta, gamma)` of an LP position worth `f` in asset of weight `w_i`
/// priced at `s_i`.
#[pyfunction]
fn lp_greeks(f: f64, w_i: f64, s_i: f64) -> (f64, f64) {
    let g = g3m_core::lp_greeks(f, w_i, s_i);
    (g.delta, g.gamma)
}

#[pyfunction]
fn bs_put_price(x: f64, t: f64, params: &BsParams) -> PyResult<f64> {
    g3m_core::bs_put_price(x, t, &params.0).map_err(py_err)
}

#[pyfunction]
fn bs_call_price(x: f64, t: f64, params: &BsParams) -> PyResult<f64> {
    g3m_core::bs_call_price(x, t, &params.0).map_err(py_err)
}

#[pyfunction]
fn protective_put_weight(x: f64, t: f64, params: &BsParams) -> PyResult<f64> {
    g3m_core::protective_put_weight(x, t, &params.0).map_err(py_err)
}

#[pyfunction]
fn covered_call_weight(x: f64, t: f64, params: &BsParams) -> PyResult<f64> {
    g3m_core::covered_call_weight(x, t, &params.0).map_err(py_err)
}

fn mc_config(paths: usize, steps: usize, seed: u64, mode: &str, antithetic: bool) -> PyResult<McConfig> {
    let mode: McMode = mode.parse().map_err(py_err)?;
    let mut cfg = McConfig::new(paths, steps, seed, mode).map_err(py_err)?;
    cfg.antithetic = antithetic;
    Ok(cfg)
}

/// Discounted expected terminal value of a constant-weight pool.
#[pyfunction]
#[pyo3(signature = (pool, params, s0, horizon, paths=20000, steps=1, seed=0, mode="closed-payoff", antithetic=false))]
#[allow(clippy::too_many_arguments)]
fn price_lp_mc(
    py: Python<'_>,
    pool: &PoolState,
    params: &MarketParams,
    s0: Vec<f64>,
    horizon: f64,
    paths: usize,
    steps: usize,
    seed: u64,
    mode: &str,
    antithetic: bool,
) -> PyResult<McEstimate> {
    let cfg = mc_config(paths, steps, seed, mode, antithetic)?;
    let s0 = prices(s0)?;
    py.detach(|| g3m_core::price_lp_mc(&pool.0, &params.0, &s0, &cfg, horizon))
        .map(McEstimate)
        .map_err(py_err)
}

/// Discounted expected terminal value of a pool worth `g0` re-weighted along
/// `schedule`.
#[pyfunction]
#[pyo3(signature = (g0, schedule, params, s0, horizon, paths=20000, steps=100, seed=0, mode="closed-payoff", antithetic=false))]
#[allow(clippy::too_many_arguments)]
fn price_dynamic_mc(
    py: Python<'_>,
    g0: f64,
    schedule: &WeightSchedule,
    params: &MarketParams,
    s0: Vec<f64>,
    horizon: f64,
    paths: usize,
    steps: usize,
    seed: u64,
    mode: &str,
    antithetic: bool,
) -> PyResult<McEstimate> {
    let cfg = mc_config(paths, steps, seed, mode, antithetic)?;
    let s0 = prices(s0)?;
    py.detach(|| g3m_core::price_dynamic_mc(g0, &schedule.0, &params.0, &s0, &cfg, horizon))
        .map(McEstimate)
        .map_err(py_err)
}

#[pymodule]
fn g3m(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<MarketParams>()?;
    m.add_class::<PoolState>()?;
    m.add_class::<WeightSchedule>()?;
    m.add_class::<BsParams>()?;
    m.add_class::<McEstimate>()?;
    m.add_function(wrap_pyfunction!(payoff_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(eta_constant, m)?)?;
    m.add_function(wrap_pyfunction!(eta_pairwise, m)?)?;
    m.add_function(wrap_pyfunction!(eta_uniswap, m)?)?;
    m.add_function(wrap_pyfunction!(eta_time_varying, m)?)?;
    m.add_function(wrap_pyfunction!(lp_price_constant, m)?)?;
    m.add_function(wrap_pyfunction!(lp_greeks, m)?)?;
    m.add_function(wrap_pyfunction!(bs_put_price, m)?)?;
    m.add_function(wrap_pyfunction!(bs_call_price, m)?)?;
    m.add_function(wrap_pyfunction!(protective_put_weight, m)?)?;
    m.add_function(wrap_pyfunction!(covered_call_weight, m)?)?;
    m.add_function(wrap_pyfunction!(price_lp_mc, m)?)?;
    m.add_function(wrap_pyfunction!(price_dynamic_mc, m)?)?;
    Ok(())
}
