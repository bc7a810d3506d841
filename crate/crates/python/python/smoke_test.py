"""Smoke test for the ddsr_py extension.

Build and install first, e.g. `maturin develop --release` in crates/python.
"""

import json
import math

import ddsr_py


def main():
    assert ddsr_py.dirichlet(3, 0.0) == 7.0
    a = ddsr_py.atom(1.0, 31.0, 15, 15, 0.123, -4.2)
    assert len(a) == 31 * 31
    assert abs(sum(a) - 1.0) < 1e-10

    channel, identifier, samples = ddsr_py.simulate(1.0, 31.0, 15, 15, 2, noise_db=None, seed=3)
    direct = json.loads(ddsr_py.forward(channel, identifier))
    assert direct["dims"] == json.loads(samples)["dims"]

    settings = json.dumps({"adcg": {"grid": [128, 128]}, "lambda": {"rule": "fixed", "value": 1e-6}})
    estimate = ddsr_py.recover("adcg", samples, identifier, features=2, settings_json=settings)
    report = json.loads(ddsr_py.evaluate(channel, estimate))
    db = report["operator_norm"]["rel_err_db"]
    assert db is None or db < -40.0, report
    assert report["success"]

    omp = json.loads(ddsr_py.recover("omp", samples, identifier, features=2, settings_json='{"omp_grid": [64, 64]}'))
    assert len(omp["features"]) == 2

    cfg = {
        "kind": "noise-sweep",
        "dims": {"T": 1.0, "Omega": 15.0, "N1": 7, "N2": 7},
        "features": 1,
        "trials": 2,
        "noise_db": [-20.0],
        "algorithms": ["omp"],
        "solvers": {"omp_grid": [32, 32]},
    }
    out = json.loads(ddsr_py.run_experiment(json.dumps(cfg)))
    assert len(out["rows"]) == 2
    assert all(math.isfinite(r["max_tau_err"]) for r in out["rows"])

    try:
        ddsr_py.recover("lasso", samples, identifier)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown algorithm accepted")

    print("ddsr_py smoke test passed")


if __name__ == "__main__":
    main()
