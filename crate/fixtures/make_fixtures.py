"""Regenerates the product fixtures in this directory.

    python3 fixtures/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from scipy.stats import norm, skewnorm

HERE = Path(__file__).resolve().parent


def dump(name, obj):
    (HERE / name).write_text(json.dumps(obj, indent=2) + "\n")


def normalized(w):
    w = np.asarray(w, dtype=float)
    return w / w.sum()


def wing_blend():
    """Skewed market, half-skew belief blended back to the market in the
    wings. The blended growth-optimal payoff, audited against the unblended
    belief, has an implied risk aversion that swings across 1 and goes
    negative."""
    n = 60
    edges = np.linspace(-3.0, 3.0, n + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    alpha = -4.0
    # A little wide normal mass keeps every bucket comfortably positive.
    base = np.diff(norm.cdf(edges, scale=2.0))

    def skewed(a, loc):
        return normalized(0.95 * normalized(np.diff(skewnorm.cdf(edges, a, loc=loc, scale=1.2))) + 0.05 * normalized(base))

    market = skewed(alpha, 0.6)
    belief = skewed(alpha / 2.0, 0.45)
    weight = np.exp(-((mids / 1.6) ** 4))
    blended = normalized(belief**weight * market ** (1.0 - weight))
    payoff = blended / market
    return {
        "name": "wing-blend",
        "notes": "half-skew belief blended back to a skewed market in the wings; "
        "payoff is the growth-optimal payoff of the blended belief",
        "mesh": edges.tolist(),
        "market": market.tolist(),
        "belief": belief.tolist(),
        "payoff": payoff.tolist(),
    }


def shimko():
    market = normalized([0.1, 0.2, 0.3, 0.25, 0.15])
    belief = normalized([0.05, 0.15, 0.3, 0.3, 0.2])
    ra = 2.5
    overlay = (belief / market - 1.0) / ra
    return {
        "name": "mean-variance overlay",
        "notes": "zero-cost overlay h = (f - 1) / 2.5",
        "mesh": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        "market": market.tolist(),
        "belief": belief.tolist(),
        "overlay": overlay.tolist(),
    }


def main():
    dump(
        "two_bucket.json",
        {
            "name": "two-bucket",
            "mesh": [0.0, 1.0, 2.0],
            "market": [0.25, 0.75],
            "belief": [0.5, 0.5],
        },
    )
    dump(
        "max_loss.json",
        {
            "name": "max-loss",
            "mesh": [0.0, 1.0, 2.0],
            "market": [0.5, 0.5],
            "belief": [0.8, 0.2],
        },
    )
    dump(
        "three_state.json",
        {
            "name": "three-state",
            "mesh": [90.0, 95.0, 105.0, 110.0],
            "prices": [0.2, 0.5, 0.3],
            "belief": [0.3, 0.5, 0.2],
        },
    )
    dump(
        "bond.json",
        {
            "name": "bond",
            "mesh": [90.0, 95.0, 105.0, 110.0],
            "market": [0.2, 0.5, 0.3],
            "belief": [0.3, 0.5, 0.2],
            "payoff": [1.0, 1.0, 1.0],
        },
    )
    dump("shimko_overlay.json", shimko())
    dump("wing_blend.json", wing_blend())
    (HERE / "prices.csv").write_text(
        "x_left,x_right,value\n0,1,0.4\n1,2,0.6\n2,3,1.0\n"
    )


if __name__ == "__main__":
    main()
