"""Smoke test for the payoff_forge extension module.

    cd crates/python && maturin build --release -o dist
    pip install dist/payoff_forge-*.whl
    python3 python/smoke_test.py
"""

import math
from pathlib import Path

import payoff_forge as pf

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b)) and len(a) == len(b)


def main():
    m = pf.imply_market_distribution([0.4, 0.6, 1.0])
    assert close(m, [0.2, 0.3, 0.5], 1e-15), m

    f = pf.growth_optimal_payoff([0.5, 0.5], [0.25, 0.75])
    assert close(pf.one_param_payoff(f, 2.0), [1.5, 5 / 6], 1e-15)
    assert pf.calibrate_max_loss([1.6, 0.4], 0.7) == 2.0

    market = [0.2, 0.5, 0.3]
    f = pf.growth_optimal_payoff([0.3, 0.5, 0.2], market)
    z = sum(w * math.sqrt(v) for w, v in zip(market, f))
    expected = [math.sqrt(v) / z for v in f]
    assert close(pf.solve_family(f, "crra:2", market), expected, 1e-10)
    by_profile = pf.solve_elasticity_profile(f, [2.0, 2.0], market)
    assert close(by_profile, expected, 1e-12)
    assert close(pf.implied_risk_aversion(by_profile, f), [2.0, 2.0], 1e-10)
    assert pf.implied_risk_aversion([1.0, 1.0, 1.0], f) == [math.inf, math.inf]

    try:
        pf.solve_elasticity_profile(f, [2.0, -1.0], market)
    except pf.PayoffForgeError as e:
        assert "risk-loving input" in str(e)
    else:
        raise AssertionError("negative profile accepted")

    product = pf.Product.load(str(FIXTURES / "two_bucket.json"))
    result = product.solve(a=2.0)
    assert close(result.payoff, [1.5, 5 / 6], 1e-15)
    assert result.report.acceptable
    assert '"solver": "one_param_family"' in result.manifest_json()

    shimko = pf.Product.load(str(FIXTURES / "shimko_overlay.json"))
    report = shimko.validate()
    assert report.acceptable and abs(report.recovered_risk_aversion - 2.5) < 1e-10

    wing = pf.Product.load(str(FIXTURES / "wing_blend.json"))
    report = wing.validate()
    assert not report.acceptable
    assert report.classification == "irrational-oscillation", report

    print(f"payoff_forge {pf.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
