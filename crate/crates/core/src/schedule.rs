//! Weight trajectories for dynamic-weight pools.

use std::fmt;
use std::sync::Arc;

use crate::error::{G3mError, Result};
use crate::pool::validate_weights;

pub type WeightFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
pub type StateWeightFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// A weight vector as a function of time, and possibly of current prices.
///
/// Deterministic kinds ignore prices. Every emitted vector is checked to be
/// a valid weight vector.
#[derive(Clone)]
pub enum WeightSchedule {
    Constant(Vec<f64>),
    /// Linear interpolation from `start` at `t_start` to `end` at `t_end`,
    /// held flat outside that window.
    Linear {
        start: Vec<f64>,
        end: Vec<f64>,
        t_start: f64,
        t_end: f64,
    },
    /// Piecewise-linear through the knots, flat outside them.
    Table {
        times: Vec<f64>,
        weights: Vec<Vec<f64>>,
    },
    Function(WeightFn),
    StateDependent(StateWeightFn),
}

impl fmt::Debug for WeightSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(w) => f.debug_tuple("Constant").field(w).finish(),
            Self::Linear {
                start,
                end,
                t_start,
                t_end,
            } => f
                .debug_struct("Linear")
                .field("start", start)
                .field("end", end)
                .field("t_start", t_start)
                .field("t_end", t_end)
                .finish(),
            Self::Table { times, weights } => f
                .debug_struct("Table")
                .field("times", times)
                .field("weights", weights)
                .finish(),
            Self::Function(_) => f.write_str("Function(..)"),
            Self::StateDependent(_) => f.write_str("StateDependent(..)"),
        }
    }
}

impl WeightSchedule {
    pub fn constant(weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights)?;
        Ok(Self::Constant(weights))
    }

    pub fn linear(start: Vec<f64>, end: Vec<f64>, t_start: f64, t_end: f64) -> Result<Self> {
        validate_weights(&start)?;
        validate_weights(&end)?;
        if start.len() != end.len() {
            return Err(G3mError::DimensionMismatch {
                expected: start.len(),
                got: end.len(),
            });
        }
        if !(t_end > t_start) {
            return Err(G3mError::Schedule(format!(
                "linear schedule needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        Ok(Self::Linear {
            start,
            end,
            t_start,
            t_end,
        })
    }

    pub fn table(times: Vec<f64>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != weights.len() {
            return Err(G3mError::Schedule(format!(
                "table needs one weight row per knot, got {} knots and {} rows",
                times.len(),
                weights.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(G3mError::Schedule("table knots must be strictly increasing".into()));
        }
        let n = weights[0].len();
        for row in &weights {
            if row.len() != n {
                return Err(G3mError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            validate_weights(row)?;
        }
        Ok(Self::Table { times, weights })
    }

    pub fn function(f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    pub fn state_dependent(f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::StateDependent(Arc::new(f))
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Self::StateDependent(_))
    }

    /// Weights in force at time `t` given current `prices`.
    pub fn eval(&self, t: f64, prices: Option<&[f64]>) -> Result<Vec<f64>> {
        let w = match self {
            Self::Constant(w) => w.clone(),
            Self::Linear {
                start,
                end,
                t_start,
                t_end,
            } => {
                let a = ((t - t_start) / (t_end - t_start)).clamp(0.0, 1.0);
                lerp(start, end, a)
            }
            Self::Table { times, weights } => {
                let k = times.partition_point(|knot| *knot <= t);
                if k == 0 {
                    weights[0].clone()
                } else if k == times.len() {
                    weights[k - 1].clone()
                } else {
                    let a = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    lerp(&weights[k - 1], &weights[k], a)
                }
            }
            Self::Function(f) => f(t),
            Self::StateDependent(f) => {
                let prices = prices.ok_or_else(|| {
                    G3mError::Schedule("state-dependent schedule needs current prices".into())
                })?;
                f(t, prices)
            }
        };
        validate_weights(&w).map_err(|e| G3mError::Schedule(format!("at t={t}: {e}")))?;
        Ok(w)
    }

    /// Weights at `t` for a deterministic schedule.
    pub fn eval_deterministic(&self, t: f64) -> Result<Vec<f64>> {
        if !self.is_deterministic() {
            return Err(G3mError::Schedule(
                "operation requires a deterministic schedule".into(),
            ));
        }
        self.eval(t, None)
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect()
}
