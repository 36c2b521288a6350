//! Replicating payoffs with a two-asset pool (risky asset plus money market)
//! whose weight is the elasticity of the target payoff.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::csv::{fmt_f64, write_record};
use crate::dynamic::reweight_and_rebalance;
use crate::error::{G3mError, Result};
use crate::market::PricePath;
use crate::normal::cdf;
use crate::pool::{PoolState, PriceVector};
use crate::schedule::WeightSchedule;

/// Weights within this distance of `[0, 1]` count as in range.
pub const WEIGHT_RANGE_TOL: f64 = 1e-12;
/// Relative step of the centered difference used when no analytic
/// derivative is available.
pub const FD_REL_STEP: f64 = 1e-6;

/// Black–Scholes inputs for a European option on the risky asset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsParams {
    pub r: f64,
    pub sigma: f64,
    pub strike: f64,
    pub expiry: f64,
}

impl BsParams {
    pub fn new(r: f64, sigma: f64, strike: f64, expiry: f64) -> Result<Self> {
        let p = Self {
            r,
            sigma,
            strike,
            expiry,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r.is_finite() {
            return Err(G3mError::InvalidOption(format!("rate must be finite, got {}", self.r)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(G3mError::InvalidOption(format!(
                "volatility must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(G3mError::InvalidOption(format!(
                "strike must be positive, got {}",
                self.strike
            )));
        }
        if !(self.expiry > 0.0 && self.expiry.is_finite()) {
            return Err(G3mError::InvalidOption(format!(
                "expiry must be positive, got {}",
                self.expiry
            )));
        }
        Ok(())
    }

    /// Time to expiry; errors unless `t < T`.
    fn tau(&self, t: f64) -> Result<f64> {
        if !(t < self.expiry) {
            return Err(G3mError::PastExpiry {
                t,
                expiry: self.expiry,
            });
        }
        Ok(self.expiry - t)
    }

    fn discounted_strike(&self, tau: f64) -> f64 {
        self.strike * (-self.r * tau).exp()
    }

    fn d1_d2(&self, x: f64, tau: f64) -> (f64, f64) {
        let sq = self.sigma * tau.sqrt();
        let d1 = ((x / self.strike).ln() + (self.r + 0.5 * self.sigma * self.sigma) * tau) / sq;
        (d1, d1 - sq)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > self.expiry {
            return Err(G3mError::PastExpiry {
                t,
                expiry: self.expiry,
            });
        }
        Ok(())
    }
}

fn check_spot(x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(G3mError::InvalidPrices(format!("spot must be positive, got {x}")));
    }
    Ok(())
}

/// European put value; intrinsic at `t = T`.
pub fn bs_put_price(x: f64, t: f64, p: &BsParams) -> Result<f64> {
    check_spot(x)?;
    p.check_time(t)?;
    if t == p.expiry {
        return Ok((p.strike - x).max(0.0));
    }
    let tau = p.expiry - t;
    let (d1, d2) = p.d1_d2(x, tau);
    Ok((p.discounted_strike(tau) * cdf(-d2) - x * cdf(-d1)).max(0.0))
}

/// European call value; intrinsic at `t = T`.
pub fn bs_call_price(x: f64, t: f64, p: &BsParams) -> Result<f64> {
    check_spot(x)?;
    p.check_time(t)?;
    if t == p.expiry {
        return Ok((x - p.strike).max(0.0));
    }
    let tau = p.expiry - t;
    let (d1, d2) = p.d1_d2(x, tau);
    Ok((x * cdf(d1) - p.discounted_strike(tau) * cdf(d2)).max(0.0))
}

/// Risky and money-market weights replicating `x + P(x, t)`. Each leg is
/// computed from its own closed form, so neither loses precision near 0.
pub fn protective_put_legs(x: f64, t: f64, p: &BsParams) -> Result<[f64; 2]> {
    check_spot(x)?;
    let tau = p.tau(t)?;
    let (d1, d2) = p.d1_d2(x, tau);
    let risky = x * cdf(d1);
    let cash = p.discounted_strike(tau) * cdf(-d2);
    let g = x + bs_put_price(x, t, p)?;
    Ok([risky / g, cash / g])
}

/// Weight on the risky asset replicating a protective put.
pub fn protective_put_weight(x: f64, t: f64, p: &BsParams) -> Result<f64> {
    Ok(protective_put_legs(x, t, p)?[0])
}

/// Risky and money-market weights replicating `x − C(x, t)`.
pub fn covered_call_legs(x: f64, t: f64, p: &BsParams) -> Result<[f64; 2]> {
    check_spot(x)?;
    let tau = p.tau(t)?;
    let (d1, d2) = p.d1_d2(x, tau);
    let risky = x * cdf(-d1);
    let cash = p.discounted_strike(tau) * cdf(d2);
    let g = risky + cash;
    if !(g > 0.0) {
        return Err(G3mError::NonPositivePayoff { x, t, value: g });
    }
    Ok([risky / g, cash / g])
}

/// Weight on the risky asset replicating a covered call.
pub fn covered_call_weight(x: f64, t: f64, p: &BsParams) -> Result<f64> {
    Ok(covered_call_legs(x, t, p)?[0])
}

pub type PayoffFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A claim `g(x, t)` on the risky asset price `x`.
#[derive(Clone)]
pub enum PayoffSpec {
    /// `x − K e^{−r(T−t)}`.
    Forward { strike: f64, rate: f64, expiry: f64 },
    Call(BsParams),
    Put(BsParams),
    /// `x + P(x, t)`.
    ProtectivePut(BsParams),
    /// `x − C(x, t)`.
    CoveredCall(BsParams),
    /// `scale · x^exponent`.
    Power { exponent: f64, scale: f64 },
    Custom {
        value: PayoffFn,
        derivative: Option<PayoffFn>,
        expiry: Option<f64>,
    },
}

impl fmt::Debug for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Forward {
                strike,
                rate,
                expiry,
            } => f
                .debug_struct("Forward")
                .field("strike", strike)
                .field("rate", rate)
                .field("expiry", expiry)
                .finish(),
            Self::Call(p) => f.debug_tuple("Call").field(p).finish(),
            Self::Put(p) => f.debug_tuple("Put").field(p).finish(),
            Self::ProtectivePut(p) => f.debug_tuple("ProtectivePut").field(p).finish(),
            Self::CoveredCall(p) => f.debug_tuple("CoveredCall").field(p).finish(),
            Self::Power { exponent, scale } => f
                .debug_struct("Power")
                .field("exponent", exponent)
                .field("scale", scale)
                .finish(),
            Self::Custom {
                derivative, expiry, ..
            } => f
                .debug_struct("Custom")
                .field("analytic_derivative", &derivative.is_some())
                .field("expiry", expiry)
                .finish(),
        }
    }
}

impl PayoffSpec {
    pub fn forward(strike: f64, rate: f64, expiry: f64) -> Result<Self> {
        if !(strike >= 0.0 && strike.is_finite()) || !rate.is_finite() || !(expiry > 0.0) {
            return Err(G3mError::InvalidOption(format!(
                "forward needs K ≥ 0, finite r and T > 0, got K={strike}, r={rate}, T={expiry}"
            )));
        }
        Ok(Self::Forward {
            strike,
            rate,
            expiry,
        })
    }

    pub fn power(exponent: f64, scale: f64) -> Result<Self> {
        if !exponent.is_finite() || !(scale > 0.0 && scale.is_finite()) {
            return Err(G3mError::InvalidOption(format!(
                "power payoff needs finite exponent and positive scale, got {exponent}, {scale}"
            )));
        }
        Ok(Self::Power { exponent, scale })
    }

    pub fn custom(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        derivative: Option<PayoffFn>,
        expiry: Option<f64>,
    ) -> Self {
        Self::Custom {
            value: Arc::new(value),
            derivative,
            expiry,
        }
    }

    pub fn expiry(&self) -> Option<f64> {
        match self {
            Self::Forward { expiry, .. } => Some(*expiry),
            Self::Call(p) | Self::Put(p) | Self::ProtectivePut(p) | Self::CoveredCall(p) => {
                Some(p.expiry)
            }
            Self::Power { .. } => None,
            Self::Custom { expiry, .. } => *expiry,
        }
    }

    /// Rate built into the claim, if any.
    pub fn rate(&self) -> Option<f64> {
        match self {
            Self::Forward { rate, .. } => Some(*rate),
            Self::Call(p) | Self::Put(p) | Self::ProtectivePut(p) | Self::CoveredCall(p) => Some(p.r),
            Self::Power { .. } | Self::Custom { .. } => None,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        match self.expiry() {
            Some(expiry) if t > expiry => Err(G3mError::PastExpiry { t, expiry }),
            _ => Ok(()),
        }
    }

    /// `g(x, t)`; option kinds return intrinsic value at expiry.
    pub fn value(&self, x: f64, t: f64) -> Result<f64> {
        check_spot(x)?;
        self.check_time(t)?;
        Ok(match self {
            Self::Forward {
                strike,
                rate,
                expiry,
            } => x - strike * (-rate * (expiry - t)).exp(),
            Self::Call(p) => bs_call_price(x, t, p)?,
            Self::Put(p) => bs_put_price(x, t, p)?,
            Self::ProtectivePut(p) => x + bs_put_price(x, t, p)?,
            Self::CoveredCall(p) => {
                if t == p.expiry {
                    x.min(p.strike)
                } else {
                    let tau = p.expiry - t;
                    let (d1, d2) = p.d1_d2(x, tau);
                    x * cdf(-d1) + p.discounted_strike(tau) * cdf(d2)
                }
            }
            Self::Power { exponent, scale } => scale * x.powf(*exponent),
            Self::Custom { value, .. } => value(x, t),
        })
    }

    /// `∂g/∂x`, analytic where available.
    pub fn dvalue_dx(&self, x: f64, t: f64) -> Result<f64> {
        check_spot(x)?;
        self.check_time(t)?;
        let option_delta = |p: &BsParams, call: bool| -> Result<f64> {
            if t == p.expiry {
                if x == p.strike {
                    return Err(G3mError::InvalidOption(format!(
                        "payoff is not differentiable at the strike x={x} at expiry"
                    )));
                }
                let itm = if call { x > p.strike } else { x < p.strike };
                return Ok(if itm { 1.0 } else { 0.0 });
            }
            let (d1, _) = p.d1_d2(x, p.expiry - t);
            Ok(if call { cdf(d1) } else { cdf(-d1) })
        };
        match self {
            Self::Forward { .. } => Ok(1.0),
            Self::Call(p) => option_delta(p, true),
            Self::Put(p) => Ok(-option_delta(p, false)?),
            Self::ProtectivePut(p) => Ok(1.0 - option_delta(p, false)?),
            Self::CoveredCall(p) => Ok(1.0 - option_delta(p, true)?),
            Self::Power { exponent, scale } => Ok(scale * exponent * x.powf(exponent - 1.0)),
            Self::Custom {
                derivative: Some(d),
                ..
            } => Ok(d(x, t)),
            Self::Custom {
                derivative: None, ..
            } => self.numeric_dvalue_dx(x, t),
        }
    }

    /// Centered difference of `g` in `x` with relative step [`FD_REL_STEP`].
    pub fn numeric_dvalue_dx(&self, x: f64, t: f64) -> Result<f64> {
        let h = FD_REL_STEP * x;
        Ok((self.value(x + h, t)? - self.value(x - h, t)?) / (2.0 * h))
    }
}

/// Elasticity `x g_x / g` of the claim.
pub fn elasticity_weight(spec: &PayoffSpec, x: f64, t: f64) -> Result<f64> {
    let g = spec.value(x, t)?;
    if !(g > 0.0) {
        return Err(G3mError::NonPositivePayoff { x, t, value: g });
    }
    Ok(x * spec.dvalue_dx(x, t)? / g)
}

/// A grid point where the replicating weight leaves `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub x: f64,
    pub t: f64,
    pub weight: f64,
}

fn in_range(w: f64) -> bool {
    (-WEIGHT_RANGE_TOL..=1.0 + WEIGHT_RANGE_TOL).contains(&w)
}

/// All grid points where the elasticity leaves `[0, 1]`. Points where it is
/// undefined (nonpositive payoff, non-differentiable payoff) are reported
/// with a NaN weight.
pub fn check_replicable(spec: &PayoffSpec, x_grid: &[f64], t_grid: &[f64]) -> Vec<Violation> {
    let mut out = Vec::new();
    for &t in t_grid {
        for &x in x_grid {
            let weight = elasticity_weight(spec, x, t).unwrap_or(f64::NAN);
            if !in_range(weight) {
                out.push(Violation { x, t, weight });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// The position held outside the pool to turn the pool's claim into a naked
/// option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Offset {
    ShortRiskyAsset { units: f64 },
    /// Short money-market position worth `K e^{−r(T−t)}` at time `t`.
    ShortCash { strike: f64, rate: f64, expiry: f64 },
}

impl Offset {
    /// Value of the liability (a positive number for a short position).
    pub fn value(&self, x: f64, t: f64) -> f64 {
        match self {
            Self::ShortRiskyAsset { units } => units * x,
            Self::ShortCash {
                strike,
                rate,
                expiry,
            } => strike * (-rate * (expiry - t).max(0.0)).exp(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NakedOption {
    pub lp_spec: PayoffSpec,
    pub offset: Offset,
}

impl NakedOption {
    /// Pool claim minus offset liability.
    pub fn option_value(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.lp_spec.value(x, t)? - self.offset.value(x, t))
    }
}

/// Splits a naked option into a replicable pool claim and an offsetting
/// position.
pub fn naked_option_offsets(kind: OptionKind, p: &BsParams) -> NakedOption {
    match kind {
        OptionKind::Put => NakedOption {
            lp_spec: PayoffSpec::ProtectivePut(*p),
            offset: Offset::ShortRiskyAsset { units: 1.0 },
        },
        OptionKind::Call => {
            let offset = Offset::ShortCash {
                strike: p.strike,
                rate: p.r,
                expiry: p.expiry,
            };
            let pv = *p;
            let pd = *p;
            let lp_spec = PayoffSpec::Custom {
                value: Arc::new(move |x, t| {
                    bs_call_price(x, t, &pv).unwrap_or(f64::NAN) + offset.value(x, t)
                }),
                derivative: Some(Arc::new(move |x, t| {
                    PayoffSpec::Call(pd).dvalue_dx(x, t).unwrap_or(f64::NAN)
                })),
                expiry: Some(p.expiry),
            };
            NakedOption { lp_spec, offset }
        }
    }
}

/// Weight for a pool that holds the claim `z` as its risky reserve and
/// replicates `g`: the ratio of their elasticities.
pub fn derivative_reserve_weight(g_spec: &PayoffSpec, z_spec: &PayoffSpec, x: f64, t: f64) -> Result<f64> {
    let eg = elasticity_weight(g_spec, x, t)?;
    let ez = elasticity_weight(z_spec, x, t)?;
    if ez == 0.0 {
        return Err(G3mError::ZeroElasticity { x });
    }
    Ok(eg / ez)
}

/// Risky and money-market legs of the replicating weight at `(x, t)`.
///
/// Closed-form specs and clamped weights keep both legs representable: a leg
/// that would be zero is floored at the smallest normal `f64`.
pub fn replicating_legs(spec: &PayoffSpec, x: f64, t: f64, clamp: bool) -> Result<[f64; 2]> {
    let floored = |legs: [f64; 2]| {
        let a = legs[0].max(f64::MIN_POSITIVE);
        let b = legs[1].max(f64::MIN_POSITIVE);
        [a / (a + b), b / (a + b)]
    };
    match spec {
        PayoffSpec::ProtectivePut(p) => Ok(floored(protective_put_legs(x, t, p)?)),
        PayoffSpec::CoveredCall(p) => Ok(floored(covered_call_legs(x, t, p)?)),
        _ => {
            let w = elasticity_weight(spec, x, t)?;
            if !in_range(w) && !clamp {
                return Err(G3mError::WeightOutOfRange { x, t, weight: w });
            }
            if in_range(w) {
                let w = w.clamp(0.0, 1.0);
                Ok([w, 1.0 - w])
            } else {
                // A clamped leg stays representable so it can be re-entered.
                let w = w.clamp(0.0, 1.0);
                Ok(floored([w, 1.0 - w]))
            }
        }
    }
}

/// State-dependent schedule over `(risky, money market)` prices.
pub fn replication_schedule(spec: PayoffSpec, clamp: bool) -> WeightSchedule {
    WeightSchedule::state_dependent(move |t, prices| {
        replicating_legs(&spec, prices[0], t, clamp)
            .map(|l| l.to_vec())
            .unwrap_or_else(|_| vec![f64::NAN, f64::NAN])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub times: Vec<f64>,
    pub weight_path: Vec<f64>,
    pub lp_values: Vec<f64>,
    pub target_values: Vec<f64>,
    pub max_abs_tracking_error: f64,
    pub max_rel_tracking_error: f64,
    pub signed_terminal_gap: f64,
}

impl ReplicationReport {
    /// CSV with columns `time, weight, lp_value, target_value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_record(&mut out, &["time", "weight", "lp_value", "target_value"])?;
        for k in 0..self.times.len() {
            write_record(
                &mut out,
                &[
                    fmt_f64(self.times[k]),
                    fmt_f64(self.weight_path[k]),
                    fmt_f64(self.lp_values[k]),
                    fmt_f64(self.target_values[k]),
                ],
            )?;
        }
        Ok(())
    }
}

/// Runs a two-asset pool along `path` (one risky column), re-weighting to
/// the replicating weight every `reweight_every` grid steps strictly before
/// expiry and letting arbitrageurs rebalance at every step. The money market
/// grows at `rate`, which defaults to the claim's own rate (or zero).
pub fn replicate_along_path(
    spec: &PayoffSpec,
    rate: Option<f64>,
    path: &PricePath,
    reweight_every: usize,
    clamp: bool,
) -> Result<ReplicationReport> {
    if path.n_assets() != 1 {
        return Err(G3mError::DimensionMismatch {
            expected: 1,
            got: path.n_assets(),
        });
    }
    if reweight_every == 0 {
        return Err(G3mError::InvalidGrid("reweight_every must be at least 1".into()));
    }
    let rate = match (rate, spec.rate()) {
        (Some(a), Some(b)) if a != b => {
            return Err(G3mError::InvalidOption(format!(
                "money-market rate {a} differs from the claim's rate {b}"
            )))
        }
        (Some(a), _) => a,
        (None, b) => b.unwrap_or(0.0),
    };
    if let Some(expiry) = spec.expiry() {
        if path.time(path.steps()) > expiry {
            return Err(G3mError::PastExpiry {
                t: path.time(path.steps()),
                expiry,
            });
        }
    }
    let m = path.with_money_market(rate);
    let before_expiry = |t: f64| spec.expiry().is_none_or(|e| t < e);

    let steps = path.steps();
    let mut times = Vec::with_capacity(steps + 1);
    let mut weight_path = Vec::with_capacity(steps + 1);
    let mut lp_values = Vec::with_capacity(steps + 1);
    let mut target_values = Vec::with_capacity(steps + 1);

    let t0 = m.time(0);
    let x0 = m.row(0)[0];
    let legs = replicating_legs(spec, x0, t0, clamp)?;
    let g0 = spec.value(x0, t0)?;
    let mut pool = PoolState::at_no_arbitrage(g0, legs.to_vec(), m.row(0))?;
    times.push(t0);
    weight_path.push(legs[0]);
    lp_values.push(g0);
    target_values.push(g0);

    for k in 1..=steps {
        let t = m.time(k);
        let row = m.row(k);
        pool = pool.arbitrage_rebalance(&PriceVector::new(row.to_vec())?)?.pool;
        if k % reweight_every == 0 && before_expiry(t) {
            let legs = replicating_legs(spec, row[0], t, clamp)?;
            pool = reweight_and_rebalance(&pool, legs.to_vec(), row)?;
        }
        times.push(t);
        weight_path.push(pool.weights()[0]);
        lp_values.push(pool.pool_value(row)?);
        target_values.push(spec.value(row[0], t)?);
    }

    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for (lp, g) in lp_values.iter().zip(&target_values) {
        let e = (lp - g).abs();
        max_abs = max_abs.max(e);
        let rel = if *g != 0.0 {
            e / g.abs()
        } else if e == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_rel = max_rel.max(rel);
    }
    let signed_terminal_gap = lp_values[steps] - target_values[steps];
    Ok(ReplicationReport {
        times,
        weight_path,
        lp_values,
        target_values,
        max_abs_tracking_error: max_abs,
        max_rel_tracking_error: max_rel,
        signed_terminal_gap,
    })
}

/// One point of the protective-put weight surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPoint {
    pub x: f64,
    pub tau: f64,
    pub weight: f64,
}

/// Protective-put weight over a grid of spot prices and times to expiry,
/// with zero rate. Row-major in `tau`.
pub fn protective_put_surface(strike: f64, sigma: f64, x_grid: &[f64], tau_grid: &[f64]) -> Result<Vec<WeightPoint>> {
    let mut out = Vec::with_capacity(x_grid.len() * tau_grid.len());
    for &tau in tau_grid {
        let p = BsParams::new(0.0, sigma, strike, tau)?;
        for &x in x_grid {
            out.push(WeightPoint {
                x,
                tau,
                weight: protective_put_weight(x, 0.0, &p)?,
            });
        }
    }
    Ok(out)
}

pub fn write_weight_surface_csv<W: Write>(points: &[WeightPoint], mut out: W) -> io::Result<()> {
    write_record(&mut out, &["x", "tau", "weight"])?;
    for p in points {
        write_record(&mut out, &[fmt_f64(p.x), fmt_f64(p.tau), fmt_f64(p.weight)])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamic::continuous_payoff;
    use crate::market::PathGrid;

    fn bs() -> BsParams {
        BsParams::new(0.0, 0.2, 100.0, 1.0).unwrap()
    }

    #[test]
    fn atm_put_reference() {
        // 100 (2Φ(0.1) − 1), 40-digit reference.
        let p = bs_put_price(100.0, 0.0, &bs()).unwrap();
        assert!((p - 7.965_567_455_405_797).abs() < 1e-12);
    }

    #[test]
    fn put_limits() {
        let p = BsParams::new(0.05, 0.2, 100.0, 1.0).unwrap();
        assert!(bs_put_price(1e6, 0.0, &p).unwrap() < 1e-12);
        let deep = bs_put_price(1e-6, 0.0, &p).unwrap();
        assert!((deep - 100.0 * (-0.05f64).exp()).abs() < 1e-5);
        assert_eq!(bs_put_price(90.0, 1.0, &p).unwrap(), 10.0);
        assert!(matches!(bs_put_price(90.0, 1.5, &p), Err(G3mError::PastExpiry { .. })));
    }

    #[test]
    fn put_call_parity() {
        let p = BsParams::new(0.03, 0.35, 80.0, 2.0).unwrap();
        for x in [20.0, 60.0, 80.0, 95.0, 300.0] {
            let c = bs_call_price(x, 0.5, &p).unwrap();
            let put = bs_put_price(x, 0.5, &p).unwrap();
            let fwd = x - 80.0 * (-0.03f64 * 1.5).exp();
            assert!((c - put - fwd).abs() < 1e-10);
        }
    }

    #[test]
    fn protective_put_weight_examples() {
        for sigma in [0.05, 0.2, 0.8] {
            for tau in [1e-4, 0.1, 1.0, 7.0] {
                let p = BsParams::new(0.0, sigma, 100.0, tau).unwrap();
                assert!((protective_put_weight(100.0, 0.0, &p).unwrap() - 0.5).abs() < 1e-12);
            }
        }
        let p = bs();
        assert!((protective_put_weight(1e4, 0.0, &p).unwrap() - 1.0).abs() < 1e-6);
        assert!(protective_put_weight(1.0, 0.0, &p).unwrap() < 1e-4);
        assert!(protective_put_weight(100.0, 1.0, &p).is_err());
    }

    #[test]
    fn protective_put_legs_sum_to_one() {
        let p = BsParams::new(0.04, 0.3, 100.0, 1.0).unwrap();
        for x in [1.0, 50.0, 100.0, 150.0, 1e4] {
            let [a, b] = protective_put_legs(x, 0.2, &p).unwrap();
            assert!((a + b - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn protective_put_weight_is_its_elasticity() {
        let p = BsParams::new(0.02, 0.25, 100.0, 1.0).unwrap();
        let spec = PayoffSpec::ProtectivePut(p);
        for x in [30.0, 80.0, 100.0, 130.0, 400.0] {
            let w = protective_put_weight(x, 0.3, &p).unwrap();
            assert!((w - elasticity_weight(&spec, x, 0.3).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn covered_call_limits_and_range() {
        let p = bs();
        assert!((covered_call_weight(1.0, 0.0, &p).unwrap() - 1.0).abs() < 1e-4);
        assert!(covered_call_weight(1e4, 0.0, &p).unwrap() < 1e-4);
        let spec = PayoffSpec::CoveredCall(p);
        let xs: Vec<f64> = (0..=100).map(|i| 10.0 * 100f64.powf(i as f64 / 100.0)).collect();
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        assert!(check_replicable(&spec, &xs, &ts).is_empty());
    }

    #[test]
    fn elasticity_examples() {
        let fwd = PayoffSpec::forward(0.0, 0.0, 1.0).unwrap();
        assert_eq!(elasticity_weight(&fwd, 3.7, 0.2).unwrap(), 1.0);
        let c = PayoffSpec::power(0.0, 4.0).unwrap();
        assert_eq!(elasticity_weight(&c, 3.7, 0.2).unwrap(), 0.0);
        let pw = PayoffSpec::power(0.3, 2.0).unwrap();
        assert!((elasticity_weight(&pw, 3.7, 0.2).unwrap() - 0.3).abs() < 1e-15);
        let custom = PayoffSpec::custom(|x, _| x.powf(0.7), None, None);
        assert!((elasticity_weight(&custom, 5.0, 0.0).unwrap() - 0.7).abs() < 1e-9);
        let neg = PayoffSpec::custom(|x, _| 1.0 - x, None, None);
        assert!(matches!(
            elasticity_weight(&neg, 2.0, 0.0),
            Err(G3mError::NonPositivePayoff { .. })
        ));
    }

    #[test]
    fn naked_call_is_not_replicable_but_offset_is() {
        let p = bs();
        let xs: Vec<f64> = (0..=50).map(|i| 10.0 * 100f64.powf(i as f64 / 50.0)).collect();
        let ts = [0.0, 0.5, 0.9];
        let v = check_replicable(&PayoffSpec::Call(p), &xs, &ts);
        assert!(!v.is_empty());
        assert!(v.iter().all(|v| v.weight > 1.0 || v.weight.is_nan()));
        assert!(v.iter().any(|v| v.weight > 1.0));
        let naked = naked_option_offsets(OptionKind::Call, &p);
        assert!(check_replicable(&naked.lp_spec, &xs, &ts).is_empty());
        for &t in &ts {
            for &x in &xs {
                let c = bs_call_price(x, t, &p).unwrap();
                assert!((naked.option_value(x, t).unwrap() - c).abs() < 1e-12 * c.max(1.0));
            }
        }
    }

    #[test]
    fn naked_put_decomposition() {
        let p = BsParams::new(0.03, 0.2, 100.0, 1.0).unwrap();
        let naked = naked_option_offsets(OptionKind::Put, &p);
        for x in [50.0, 100.0, 170.0] {
            let put = bs_put_price(x, 0.1, &p).unwrap();
            assert!((naked.option_value(x, 0.1).unwrap() - put).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_reserve_examples() {
        let p = bs();
        let call = PayoffSpec::Call(p);
        assert!((derivative_reserve_weight(&call, &call, 110.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let fwd = PayoffSpec::forward(0.0, 0.0, 1.0).unwrap();
        let pp = PayoffSpec::ProtectivePut(p);
        let direct = elasticity_weight(&pp, 90.0, 0.0).unwrap();
        assert!((derivative_reserve_weight(&pp, &fwd, 90.0, 0.0).unwrap() - direct).abs() < 1e-15);
        let zero = PayoffSpec::power(0.0, 1.0).unwrap();
        assert!(matches!(
            derivative_reserve_weight(&pp, &zero, 90.0, 0.0),
            Err(G3mError::ZeroElasticity { .. })
        ));
    }

    #[test]
    fn call_reserve_needs_dominating_elasticity() {
        // A call's elasticity falls as its strike falls, so only a
        // higher-strike reserve can carry a lower-strike claim.
        let high = PayoffSpec::Call(bs());
        let low = PayoffSpec::Call(BsParams::new(0.0, 0.2, 80.0, 1.0).unwrap());
        for i in 0..=40 {
            let x = 60.0 + 3.0 * i as f64;
            let w = derivative_reserve_weight(&low, &high, x, 0.0).unwrap();
            assert!(w > 0.0 && w <= 1.0 + WEIGHT_RANGE_TOL, "x={x} w={w}");
            let inverted = derivative_reserve_weight(&high, &low, x, 0.0).unwrap();
            assert!(inverted > 1.0, "x={x} w={inverted}");
        }
    }

    #[test]
    fn analytic_and_numeric_deltas_agree() {
        let p = BsParams::new(0.02, 0.3, 100.0, 1.0).unwrap();
        let specs = [
            PayoffSpec::Call(p),
            PayoffSpec::Put(p),
            PayoffSpec::ProtectivePut(p),
            PayoffSpec::CoveredCall(p),
        ];
        for spec in &specs {
            for x in [60.0, 90.0, 100.0, 115.0, 160.0] {
                let a = spec.dvalue_dx(x, 0.25).unwrap();
                let n = spec.numeric_dvalue_dx(x, 0.25).unwrap();
                assert!((a - n).abs() < 1e-7 * a.abs(), "{spec:?} x={x}");
            }
        }
    }

    #[test]
    fn expiry_kink_is_rejected() {
        let call = PayoffSpec::Call(bs());
        assert!(call.dvalue_dx(100.0, 1.0).is_err());
        assert_eq!(call.dvalue_dx(120.0, 1.0).unwrap(), 1.0);
        assert_eq!(call.value(120.0, 1.0).unwrap(), 20.0);
    }

    fn deterministic_path(x0: f64, mu: f64, horizon: f64, steps: usize) -> PricePath {
        let grid = PathGrid::new(0.0, horizon, steps).unwrap();
        let rows: Vec<Vec<f64>> = (0..=steps).map(|k| vec![x0 * (mu * grid.time(k)).exp()]).collect();
        PricePath::from_rows(grid, &rows).unwrap()
    }

    #[test]
    fn forward_tracks_exactly() {
        let spec = PayoffSpec::forward(0.0, 0.0, 1.0).unwrap();
        let grid = PathGrid::new(0.0, 1.0, 200).unwrap();
        let rows: Vec<Vec<f64>> = (0..=200)
            .map(|k| vec![100.0 * (1.0 + 0.3 * (k as f64 * 0.37).sin())])
            .collect();
        let path = PricePath::from_rows(grid, &rows).unwrap();
        let rep = replicate_along_path(&spec, None, &path, 1, false).unwrap();
        assert!(rep.max_abs_tracking_error < 1e-12 * 130.0);
        assert!(rep.weight_path.iter().all(|w| *w == 1.0));
    }

    #[test]
    fn power_payoff_tracks_deterministic_path() {
        let spec = PayoffSpec::power(0.4, 1.0).unwrap();
        let path = deterministic_path(50.0, 0.3, 1.0, 100);
        let schedule = replication_schedule(spec.clone(), false);
        let m = path.with_money_market(0.0);
        let g0 = spec.value(50.0, 0.0).unwrap();
        let cont = continuous_payoff(g0, &schedule, &m).unwrap();
        let target = spec.value(path.terminal()[0], 1.0).unwrap();
        assert!((cont - target).abs() < 1e-12 * target);
        let rep = replicate_along_path(&spec, Some(0.0), &path, 1, false).unwrap();
        assert!(rep.max_rel_tracking_error < 1e-12);
    }

    #[test]
    fn out_of_range_weights_error_unless_clamped() {
        let spec = PayoffSpec::Call(bs());
        let path = deterministic_path(100.0, 0.0, 0.5, 10);
        assert!(matches!(
            replicate_along_path(&spec, None, &path, 1, false),
            Err(G3mError::WeightOutOfRange { .. })
        ));
        let rep = replicate_along_path(&spec, None, &path, 1, true).unwrap();
        assert!(rep.weight_path.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn replication_rejects_rate_mismatch_and_bad_stride() {
        let spec = PayoffSpec::ProtectivePut(bs());
        let path = deterministic_path(100.0, 0.0, 0.5, 10);
        assert!(replicate_along_path(&spec, Some(0.1), &path, 1, false).is_err());
        assert!(replicate_along_path(&spec, None, &path, 0, false).is_err());
        let long = deterministic_path(100.0, 0.0, 2.0, 10);
        assert!(matches!(
            replicate_along_path(&spec, None, &long, 1, false),
            Err(G3mError::PastExpiry { .. })
        ));
    }

    #[test]
    fn protective_put_lp_is_a_sub_hedge_at_expiry() {
        let p = BsParams::new(0.0, 0.2, 100.0, 1.0).unwrap();
        let spec = PayoffSpec::ProtectivePut(p);
        let grid = PathGrid::new(0.0, 1.0, 250).unwrap();
        let rows: Vec<Vec<f64>> = (0..=250)
            .map(|k| vec![100.0 * (0.15 * (k as f64 * 0.21).sin()).exp()])
            .collect();
        let path = PricePath::from_rows(grid, &rows).unwrap();
        let rep = replicate_along_path(&spec, None, &path, 1, false).unwrap();
        assert!(rep.signed_terminal_gap < 0.0);
        assert_eq!(rep.weight_path.len(), 251);
    }

    #[test]
    fn surface_shape() {
        let xs: Vec<f64> = (1..=40).map(|i| 5.0 * i as f64).collect();
        let pts = protective_put_surface(100.0, 0.2, &xs, &[0.25, 1.0]).unwrap();
        assert_eq!(pts.len(), 80);
        for row in pts.chunks(40) {
            assert!(row.windows(2).all(|w| w[1].weight >= w[0].weight));
        }
        let mut buf = Vec::new();
        write_weight_surface_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,tau,weight\n5,0.25,"));
    }
}
