"""Smoke test for the `siren` extension module.

Build and run from the repository root:

    cargo build --release -p siren-py
    cp target/release/libsiren.so python/siren.so
    python3 python/smoke_test.py

or install with `maturin develop -m crates/python/pyproject.toml`.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import siren  # noqa: E402


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    q = siren.select([0.2, 0.5, 0.4], "softmax", 0.1)
    assert close(sum(q), 1.0) and q[1] == max(q)
    assert siren.select([0.5, 0.5, 0.1], "hard") == [1.0, 0.0, 0.0]
    j = siren.jacobian([0.2, 0.5, 0.4], "softmax", 1.0)
    assert all(close(sum(row), 0.0) for row in j)

    t = siren.simulate(300, 5, seed=7)
    assert t.n_items == 300 and t.cells == [("sim", "0")]
    assert t.validate() == []
    again = siren.ScoreTensor.from_json(t.to_json())
    assert again.fingerprint() == t.fingerprint()
    assert siren.ScoreTensor.from_csv(t.to_csv()).fingerprint() == t.fingerprint()

    d = siren.SplitDesign(300, n_splits=5, seed=1)
    assert d.n_splits == 5 and len(d.splits[0][0]) == 150
    est = siren.estimate(t, d)
    cell = est["cells"][0]
    assert 0.0 < cell["theta"] < 1.0
    assert abs(sum(cell["psi"])) < 1e-8

    boot = siren.bootstrap(t, d, n_boot=500, seed=3, contrasts=[["sim:0:1"]])
    ci = boot["cells"][0]["pointwise"]
    assert ci["lo"] < cell["theta"] < ci["hi"]
    assert close(boot["contrasts"][0]["interval"]["lo"], ci["lo"])

    rep = siren.report(t, json.dumps({"n_splits": 5, "n_boot": 500, "seed": 3}))
    assert rep["cells"][0]["theta"] == siren.report(t, json.dumps({"n_splits": 5, "n_boot": 500, "seed": 3}))["cells"][0]["theta"]

    m1 = siren.baseline(t, "m1")["cells"][0]["estimate"]
    assert m1 >= cell["theta"] - 0.05
    ib = siren.item_bootstrap(t, d, n_resamples=200, seed=1)[0]
    assert math.isfinite(ib["ci"]["lo"])

    try:
        siren.SplitDesign(10, rho_score=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError for rho_score=1.5")

    print(f"siren {siren.__version__}: theta={cell['theta']:.4f} ci=[{ci['lo']:.4f}, {ci['hi']:.4f}] M1={m1:.4f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
