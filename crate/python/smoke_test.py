"""Smoke test for the `g3m` extension module.

Build first: pip install --no-build-isolation ./crates/python
"""

import math

import g3m


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    pool = g3m.PoolState([10.0, 10.0], [1 / 3, 2 / 3])
    close(pool.spot_price(1, 0), 2.0, 1e-12)
    rebalanced, deltas, profit = pool.arbitrage_rebalance([1.0, 1.0])
    close(profit, 1.1012, 5e-4)
    close(rebalanced.reserves[1], 2 * rebalanced.reserves[0], 1e-9)
    assert rebalanced.is_at_no_arbitrage([1.0, 1.0])

    market = g3m.MarketParams(0.0, [0.3, 0.2])
    close(g3m.eta_constant([0.5, 0.5], market, 1.0), -0.01625, 1e-15)
    close(g3m.eta_uniswap(0.3, 0.2, 0.0, 1.0), -0.01625, 1e-15)

    start = g3m.PoolState.at_no_arbitrage(1.0, [0.5, 0.5], [1.0, 1.0])
    est = g3m.price_lp_mc(start, market, [1.0, 1.0], 1.0, paths=20000, seed=1)
    assert abs(est.z_score(math.exp(-0.01625))) < 4.0, est

    schedule = g3m.WeightSchedule.linear([1.0, 0.0], [0.0, 1.0], 0.0, 1.0)
    close(g3m.eta_time_varying(schedule, market, 0.0, 1.0), -0.13 / 12, 1e-7)

    bs = g3m.BsParams(0.0, 0.2, 100.0, 1.0)
    close(g3m.bs_put_price(100.0, 0.0, bs), 7.965567455405796, 1e-12)
    close(g3m.protective_put_weight(100.0, 0.0, bs), 0.5, 1e-12)

    delta, gamma = g3m.lp_greeks(2.0, 0.25, 4.0)
    close(delta, 0.125, 1e-15)
    assert gamma < 0.0

    try:
        g3m.PoolState([1.0, 1.0], [0.7, 0.7])
    except ValueError:
        pass
    else:
        raise AssertionError("weights not summing to one were accepted")

    print("g3m smoke test passed")


if __name__ == "__main__":
    main()
