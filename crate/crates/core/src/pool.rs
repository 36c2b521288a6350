//! Pool state and trade mechanics of a geometric mean market maker.
//!
//! A pool with reserves `R` and weights `w` accepts exactly the trades that
//! keep the weighted geometric mean `V = Π R_i^{w_i}` unchanged. Trades are
//! signed from the trader's point of view: a positive delta is a deposit into
//! the pool, a negative delta a withdrawal.
//!
//! Assets with zero weight are allowed only while they hold no reserves; their
//! factors drop out of every product (the `w -> 0` limit of `x^w` is 1).

use std::ops::Deref;

use crate::error::{G3mError, Result};

/// Tolerance on `Σ w_i = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Default relative tolerance on the invariant when checking feasibility.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Checks that `weights` are finite, nonnegative and sum to one.
pub fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(G3mError::InvalidWeights("empty weight vector".into()));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(G3mError::InvalidWeights(format!(
                "weight {i} is {w}, expected a finite nonnegative value"
            )));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(G3mError::InvalidWeights(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// `(s / w)^w`, taken as 1 when `w == 0`.
#[inline]
pub(crate) fn weighted_factor(s: f64, w: f64) -> f64 {
    if w == 0.0 {
        1.0
    } else {
        let q = s / w;
        if q.is_finite() {
            q.powf(w)
        } else {
            (w * (s.ln() - w.ln())).exp()
        }
    }
}

/// Strictly positive asset prices in a common numeraire.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(G3mError::InvalidPrices("empty price vector".into()));
        }
        if let Some((i, p)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p <= 0.0)
        {
            return Err(G3mError::InvalidPrices(format!(
                "price {i} is {p}, expected a finite positive value"
            )));
        }
        Ok(Self(prices))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PriceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Signed reserve changes; positive entries are deposits into the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub deltas: Vec<f64>,
}

impl Trade {
    pub fn new(deltas: Vec<f64>) -> Self {
        Self { deltas }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            deltas: vec![0.0; n],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.deltas.iter().all(|d| *d == 0.0)
    }

    /// Value of the trade to the trader: `-Σ S_i Δ_i`.
    pub fn trader_profit(&self, prices: &[f64]) -> f64 {
        -self
            .deltas
            .iter()
            .zip(prices)
            .map(|(d, s)| d * s)
            .sum::<f64>()
    }
}

/// Reserves and weights of an `n`-asset pool, `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    reserves: Vec<f64>,
    weights: Vec<f64>,
}

/// Result of restoring the no-arbitrage allocation at external prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageOutcome {
    pub pool: PoolState,
    pub trade: Trade,
    pub profit: f64,
}

impl PoolState {
    pub fn new(reserves: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(G3mError::InvalidWeights(format!(
                "a pool needs at least two assets, got {}",
                weights.len()
            )));
        }
        if reserves.len() != weights.len() {
            return Err(G3mError::DimensionMismatch {
                expected: weights.len(),
                got: reserves.len(),
            });
        }
        validate_weights(&weights)?;
        for (i, (&r, &w)) in reserves.iter().zip(&weights).enumerate() {
            if !r.is_finite() {
                return Err(G3mError::InvalidReserves(format!("reserve {i} is {r}")));
            }
            if w > 0.0 && r <= 0.0 {
                return Err(G3mError::InvalidReserves(format!(
                    "reserve {i} is {r}, expected a positive value"
                )));
            }
            if w == 0.0 && r != 0.0 {
                return Err(G3mError::ZeroWeightReserve { asset: i });
            }
        }
        Ok(Self { reserves, weights })
    }

    /// Pool holding value `g` at `prices` in the no-arbitrage allocation
    /// `R_i = w_i g / S_i`.
    pub fn at_no_arbitrage(g: f64, weights: Vec<f64>, prices: &[f64]) -> Result<Self> {
        if prices.len() != weights.len() {
            return Err(G3mError::DimensionMismatch {
                expected: weights.len(),
                got: prices.len(),
            });
        }
        if !(g.is_finite() && g > 0.0) {
            return Err(G3mError::InvalidReserves(format!(
                "pool value {g} must be positive"
            )));
        }
        let reserves = weights.iter().zip(prices).map(|(w, s)| w * g / s).collect();
        Self::new(reserves, weights)
    }

    pub fn reserves(&self) -> &[f64] {
        &self.reserves
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// The invariant `V = Π R_i^{w_i}`.
    pub fn geometric_mean(&self) -> f64 {
        invariant_of(&self.reserves, &self.weights)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(G3mError::DimensionMismatch {
                expected: self.n(),
                got: len,
            });
        }
        Ok(())
    }

    fn post_trade_reserves(&self, trade: &Trade) -> Vec<f64> {
        self.reserves
            .iter()
            .zip(&trade.deltas)
            .map(|(r, d)| r + d)
            .collect()
    }

    /// Whether the pool accepts `trade`, with `tol` relative to `V`.
    pub fn is_feasible(&self, trade: &Trade, tol: f64) -> Result<bool> {
        self.check_dim(trade.deltas.len())?;
        let after = self.post_trade_reserves(trade);
        for ((r, w), d) in after.iter().zip(&self.weights).zip(&trade.deltas) {
            if *w == 0.0 && *d != 0.0 {
                return Ok(false);
            }
            if *w > 0.0 && !(*r > 0.0) {
                return Ok(false);
            }
        }
        let v = self.geometric_mean();
        let v_after = invariant_of(&after, &self.weights);
        Ok((v_after - v).abs() <= tol * v)
    }

    pub fn apply_trade(&self, trade: &Trade, tol: f64) -> Result<PoolState> {
        self.check_dim(trade.deltas.len())?;
        let after = self.post_trade_reserves(trade);
        for (i, ((r, w), d)) in after.iter().zip(&self.weights).zip(&trade.deltas).enumerate() {
            if *w == 0.0 && *d != 0.0 {
                return Err(G3mError::ZeroWeight { asset: i });
            }
            if *w > 0.0 && !(*r > 0.0) {
                return Err(G3mError::NonPositiveReserve { asset: i });
            }
        }
        let v = self.geometric_mean();
        let v_after = invariant_of(&after, &self.weights);
        if (v_after - v).abs() > tol * v {
            return Err(G3mError::InfeasibleTrade {
                before: v,
                after: v_after,
            });
        }
        Ok(Self {
            reserves: after,
            weights: self.weights.clone(),
        })
    }

    /// Two-asset trade depositing `deposit` units of asset `i` (negative to
    /// withdraw) with the amount of asset `j` solved from the invariant.
    pub fn pair_trade(&self, i: usize, deposit: f64, j: usize) -> Result<Trade> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(G3mError::InvalidIndex(format!("pair trade needs i != j, got {i}")));
        }
        for k in [i, j] {
            if self.weights[k] == 0.0 {
                return Err(G3mError::ZeroWeight { asset: k });
            }
        }
        let ri = self.reserves[i];
        if !(ri + deposit > 0.0) {
            return Err(G3mError::NonPositiveReserve { asset: i });
        }
        let rj = self.reserves[j];
        let rj_after = rj * (ri / (ri + deposit)).powf(self.weights[i] / self.weights[j]);
        let mut deltas = vec![0.0; self.n()];
        deltas[i] = deposit;
        deltas[j] = rj_after - rj;
        Ok(Trade { deltas })
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(G3mError::InvalidIndex(format!(
                "asset {i} out of range for a {}-asset pool",
                self.n()
            )));
        }
        Ok(())
    }

    /// Marginal price of asset `i` in units of asset `j`:
    /// `(R_j / w_j) / (R_i / w_i)`.
    pub fn spot_price(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(G3mError::InvalidIndex(format!("spot price needs i != j, got {i}")));
        }
        for k in [i, j] {
            if self.weights[k] == 0.0 {
                return Err(G3mError::ZeroWeight { asset: k });
            }
        }
        let (ri, wi) = (self.reserves[i], self.weights[i]);
        let (rj, wj) = (self.reserves[j], self.weights[j]);
        Ok((rj / wj) / (ri / wi))
    }

    /// Market value `Σ R_i S_i` of the reserves.
    pub fn pool_value(&self, prices: &[f64]) -> Result<f64> {
        self.check_dim(prices.len())?;
        if let Some(p) = prices.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(G3mError::InvalidPrices(format!("price {p} is not a finite nonnegative value")));
        }
        Ok(self.reserves.iter().zip(prices).map(|(r, s)| r * s).sum())
    }

    /// Moves the pool to the allocation `R'_i S_i = w_i G'` with
    /// `G' = V Π (S_i/w_i)^{w_i}`, which maximizes the arbitrageur's profit
    /// among all feasible trades.
    pub fn arbitrage_rebalance(&self, prices: &PriceVector) -> Result<ArbitrageOutcome> {
        self.check_dim(prices.len())?;
        if let Some(asset) = self
            .reserves
            .iter()
            .zip(&self.weights)
            .position(|(r, w)| *w == 0.0 && *r != 0.0)
        {
            return Err(G3mError::ZeroWeightReserve { asset });
        }
        let v = self.geometric_mean();
        let g = payoff_closed_form(v, &self.weights, prices);
        let reserves: Vec<f64> = self
            .weights
            .iter()
            .zip(prices.iter())
            .map(|(w, s)| w * g / s)
            .collect();
        let deltas = reserves
            .iter()
            .zip(&self.reserves)
            .map(|(new, old)| new - old)
            .collect();
        let trade = Trade { deltas };
        // Σ S_i R_i - G' rather than -Σ S_i Δ_i: no cancellation once G' is known.
        let profit = (self.pool_value(prices)? - g).max(0.0);
        Ok(ArbitrageOutcome {
            pool: Self {
                reserves,
                weights: self.weights.clone(),
            },
            trade,
            profit,
        })
    }

    /// Trader profit `-Σ S_i Δ_i` of a feasible trade.
    pub fn arbitrage_profit_of_trade(
        &self,
        prices: &[f64],
        trade: &Trade,
        tol: f64,
    ) -> Result<f64> {
        self.check_dim(prices.len())?;
        if !self.is_feasible(trade, tol)? {
            let after = self.post_trade_reserves(trade);
            return Err(G3mError::InfeasibleTrade {
                before: self.geometric_mean(),
                after: invariant_of(&after, &self.weights),
            });
        }
        Ok(trade.trader_profit(prices))
    }

    /// Same reserves under new weights. The invariant changes accordingly.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<PoolState> {
        self.check_dim(weights.len())?;
        Self::new(self.reserves.clone(), weights)
    }

    /// Whether `R_i S_i = w_i Σ R_j S_j` holds for every asset within `tol`
    /// relative to the pool value.
    pub fn is_at_no_arbitrage(&self, prices: &[f64], tol: f64) -> Result<bool> {
        let g = self.pool_value(prices)?;
        Ok(self
            .reserves
            .iter()
            .zip(&self.weights)
            .zip(prices)
            .all(|((r, w), s)| (r * s - w * g).abs() <= tol * g))
    }
}

fn invariant_of(reserves: &[f64], weights: &[f64]) -> f64 {
    reserves
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(r, w)| r.powf(*w))
        .product()
}

/// LP-share payoff `G = V Π (S_i / w_i)^{w_i}` of a pool at no-arbitrage.
pub fn payoff_closed_form(v: f64, weights: &[f64], prices: &[f64]) -> f64 {
    assert_eq!(weights.len(), prices.len(), "weights and prices differ in length");
    v * weights
        .iter()
        .zip(prices)
        .map(|(w, s)| weighted_factor(*s, *w))
        .product::<f64>()
}
