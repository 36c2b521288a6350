//! Risk-neutral correlated geometric Brownian motion.
//!
//! Every asset follows `dS_i = S_i (r dt + σ_i dW_i)` with
//! `dW_i dW_j = ρ_ij dt`. Paths are sampled exactly in log space, so the
//! terminal distribution carries no discretization error whatever the step
//! count.
//!
//! Random numbers come from ChaCha8 keyed by the user seed, with one ChaCha
//! stream per path index. Path `p` is therefore the same no matter how many
//! paths are drawn or how many threads draw them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{G3mError, Result};
use crate::pool::PriceVector;

/// Pivots below this are treated as zero in the semidefinite factorization.
const PSD_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    /// Risk-free rate per unit time.
    pub r: f64,
    /// Per-asset volatilities.
    pub sigma: Vec<f64>,
    /// Instantaneous correlation matrix.
    pub corr: Vec<Vec<f64>>,
}

impl MarketParams {
    /// Builds and validates.
    pub fn new(r: f64, sigma: Vec<f64>, corr: Vec<Vec<f64>>) -> Result<Self> {
        let params = Self { r, sigma, corr };
        params.validate()?;
        Ok(params)
    }

    /// Uncorrelated assets.
    pub fn independent(r: f64, sigma: Vec<f64>) -> Result<Self> {
        let n = sigma.len();
        let corr = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(r, sigma, corr)
    }

    /// Two assets with correlation `rho`.
    pub fn pair(r: f64, sigma_a: f64, sigma_b: f64, rho: f64) -> Result<Self> {
        Self::new(r, vec![sigma_a, sigma_b], vec![vec![1.0, rho], vec![rho, 1.0]])
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.factor().map(|_| ())
    }

    /// Lower-triangular `L` with `L Lᵀ = corr`, allowing singular matrices.
    pub fn factor(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        if n == 0 {
            return Err(G3mError::InvalidMarket("no assets".into()));
        }
        if !self.r.is_finite() {
            return Err(G3mError::InvalidMarket(format!("rate {} is not finite", self.r)));
        }
        for (i, s) in self.sigma.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(G3mError::InvalidMarket(format!(
                    "volatility {i} is {s}, expected a positive value"
                )));
            }
        }
        if self.corr.len() != n || self.corr.iter().any(|row| row.len() != n) {
            return Err(G3mError::InvalidMarket(format!(
                "correlation matrix must be {n}x{n}"
            )));
        }
        for i in 0..n {
            if self.corr[i][i] != 1.0 {
                return Err(G3mError::InvalidMarket(format!(
                    "correlation diagonal entry {i} is {}, expected 1",
                    self.corr[i][i]
                )));
            }
            for j in 0..i {
                let (a, b) = (self.corr[i][j], self.corr[j][i]);
                if a != b {
                    return Err(G3mError::InvalidMarket(format!(
                        "correlation matrix is not symmetric at ({i}, {j})"
                    )));
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(G3mError::InvalidMarket(format!(
                        "correlation ({i}, {j}) = {a} lies outside [-1, 1]"
                    )));
                }
            }
        }
        semidefinite_cholesky(&self.corr)
    }
}

/// Cholesky factorization that tolerates zero pivots. A zero pivot zeroes
/// its column; the remaining entries of that column must then vanish too,
/// otherwise the matrix is indefinite.
fn semidefinite_cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - l[j][..j].iter().map(|x| x * x).sum::<f64>();
        if d < -PSD_PIVOT_TOL {
            return Err(G3mError::NotPositiveSemidefinite { pivot: j, value: d });
        }
        if d <= PSD_PIVOT_TOL {
            for i in (j + 1)..n {
                let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if s.abs() > 1e-9 {
                    return Err(G3mError::NotPositiveSemidefinite { pivot: j, value: d });
                }
            }
            continue;
        }
        let diag = d.sqrt();
        l[j][j] = diag;
        for i in (j + 1)..n {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / diag;
        }
    }
    Ok(l)
}

/// Uniform time grid on `[t0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    pub t0: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl PathGrid {
    pub fn new(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && t0 >= 0.0 && t_end > t0) {
            return Err(G3mError::InvalidGrid(format!(
                "need 0 <= t0 < T, got t0={t0}, T={t_end}"
            )));
        }
        if steps == 0 {
            return Err(G3mError::InvalidGrid("steps must be positive".into()));
        }
        Ok(Self { t0, t_end, steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.steps as f64
    }

    pub fn horizon(&self) -> f64 {
        self.t_end - self.t0
    }

    /// Time of grid point `k`; the last point is exactly `t_end`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Prices of `n` assets at every point of a grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    grid: PathGrid,
    n: usize,
    values: Vec<f64>,
}

impl PricePath {
    pub fn new(grid: PathGrid, n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != (grid.steps + 1) * n {
            return Err(G3mError::InvalidGrid(format!(
                "expected {} x {n} prices, got {}",
                grid.steps + 1,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(G3mError::InvalidPrices(format!("path price {v} is not positive")));
        }
        Ok(Self { grid, n, values })
    }

    pub fn from_rows(grid: PathGrid, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(G3mError::InvalidGrid("ragged price rows".into()));
        }
        Self::new(grid, n, rows.concat())
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn n_assets(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    pub fn initial(&self) -> &[f64] {
        self.row(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.row(self.grid.steps)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    /// Every `stride`-th point of the path, keeping both endpoints.
    pub fn subsample(&self, stride: usize) -> Result<PricePath> {
        if stride == 0 || !self.grid.steps.is_multiple_of(stride) {
            return Err(G3mError::InvalidGrid(format!(
                "stride {stride} does not divide {} steps",
                self.grid.steps
            )));
        }
        let grid = PathGrid::new(self.grid.t0, self.grid.t_end, self.grid.steps / stride)?;
        let values = (0..=grid.steps)
            .flat_map(|k| self.row(k * stride).iter().copied())
            .collect();
        Ok(PricePath {
            grid,
            n: self.n,
            values,
        })
    }

    /// This path with one extra asset appended: the money-market account
    /// `M(t) = e^{r t}`.
    pub fn with_money_market(&self, r: f64) -> PricePath {
        let n = self.n + 1;
        let mut values = Vec::with_capacity((self.grid.steps + 1) * n);
        for (k, row) in self.rows().enumerate() {
            values.extend_from_slice(row);
            values.push((r * self.time(k)).exp());
        }
        PricePath {
            grid: self.grid,
            n,
            values,
        }
    }
}

/// Draws individual paths for fixed market, start prices, grid and seed.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    s0: Vec<f64>,
    grid: PathGrid,
    seed: u64,
    factor: Vec<Vec<f64>>,
    drift: Vec<f64>,
    vol: Vec<f64>,
}

impl PathSimulator {
    pub fn new(params: &MarketParams, s0: &PriceVector, grid: PathGrid, seed: u64) -> Result<Self> {
        let factor = params.factor()?;
        if s0.len() != params.n() {
            return Err(G3mError::DimensionMismatch {
                expected: params.n(),
                got: s0.len(),
            });
        }
        let h = grid.dt();
        let drift = params
            .sigma
            .iter()
            .map(|s| (params.r - 0.5 * s * s) * h)
            .collect();
        let vol = params.sigma.iter().map(|s| s * h.sqrt()).collect();
        Ok(Self {
            s0: s0.to_vec(),
            grid,
            seed,
            factor,
            drift,
            vol,
        })
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn n_assets(&self) -> usize {
        self.s0.len()
    }

    /// Path number `index`. With `antithetic` every driving normal is negated.
    pub fn path(&self, index: u64, antithetic: bool) -> PricePath {
        let n = self.s0.len();
        let steps = self.grid.steps;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let sign = if antithetic { -1.0 } else { 1.0 };

        let mut values = Vec::with_capacity((steps + 1) * n);
        values.extend_from_slice(&self.s0);
        let mut log_s: Vec<f64> = self.s0.iter().map(|s| s.ln()).collect();
        let mut z = vec![0.0; n];
        for _ in 0..steps {
            for zi in z.iter_mut() {
                *zi = sign * rng.sample::<f64, _>(StandardNormal);
            }
            for i in 0..n {
                let eps: f64 = self.factor[i][..=i]
                    .iter()
                    .zip(&z)
                    .map(|(l, z)| l * z)
                    .sum();
                log_s[i] += self.drift[i] + self.vol[i] * eps;
                values.push(log_s[i].exp());
            }
        }
        PricePath {
            grid: self.grid,
            n,
            values,
        }
    }
}

/// Simulates `n_paths` independent paths, in path-index order.
pub fn simulate_paths(
    params: &MarketParams,
    s0: &PriceVector,
    grid: PathGrid,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<PricePath>> {
    let sim = PathSimulator::new(params, s0, grid, seed)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|p| sim.path(p, false))
        .collect())
}

/// Volatility `σ_P` of the weighted geometric mean `Π S_i^{w_i}`.
pub fn portfolio_volatility(weights: &[f64], params: &MarketParams) -> Result<f64> {
    if weights.len() != params.n() {
        return Err(G3mError::DimensionMismatch {
            expected: params.n(),
            got: weights.len(),
        });
    }
    let mut var = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        for (j, wj) in weights.iter().enumerate() {
            var += wi * wj * params.sigma[i] * params.sigma[j] * params.corr[i][j];
        }
    }
    Ok(var.max(0.0).sqrt())
}

/// Volatility of the price ratio `S_a / S_b`.
pub fn ratio_volatility(params: &MarketParams, a: usize, b: usize) -> Result<f64> {
    let n = params.n();
    if a >= n || b >= n || a == b {
        return Err(G3mError::InvalidIndex(format!(
            "ratio needs two distinct assets below {n}, got ({a}, {b})"
        )));
    }
    let (sa, sb) = (params.sigma[a], params.sigma[b]);
    let var = sa * sa + sb * sb - 2.0 * sa * sb * params.corr[a][b];
    Ok(var.max(0.0).sqrt())
}
