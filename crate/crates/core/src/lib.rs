//! Geometric mean market makers: constant- and dynamic-weight pools,
//! arbitrage mechanics, closed-form LP valuation, derivative replication and
//! Monte Carlo checks under multi-asset geometric Brownian motion.

// Negated comparisons reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod csv;
pub mod dynamic;
pub mod error;
pub mod market;
pub mod mc;
pub mod normal;
pub mod pool;
pub mod pricing;
pub mod replication;
pub mod schedule;

pub use dynamic::{
    continuous_payoff, discrete_payoff, discrete_v_update, simulate_reweighting_pool,
    wgm_continuous, ReweightTrajectory,
};
pub use error::{G3mError, Result};
pub use market::{simulate_paths, MarketParams, PathGrid, PathSimulator, PricePath};
pub use pool::{payoff_closed_form, ArbitrageOutcome, PoolState, PriceVector, Trade};
pub use pricing::{
    eta_constant, eta_pairwise, eta_time_varying, eta_uniswap, lp_greeks, lp_price_constant,
    EtaReport, LpGreeks,
};
pub use schedule::WeightSchedule;
pub use replication::{
    bs_call_price, bs_put_price, check_replicable, covered_call_weight, derivative_reserve_weight,
    elasticity_weight, naked_option_offsets, protective_put_weight, replicate_along_path,
    BsParams, OptionKind, PayoffSpec, ReplicationReport,
};
pub use mc::{
    price_dynamic_mc, price_lp_mc, realized_stat, McConfig, McEstimate, McMode, RealizedStat,
};
