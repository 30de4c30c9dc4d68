"""Smoke test for the confcause extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import json
import math

import confcause


def check_fisher_z():
    rho, n, k = 0.3, 100, 2
    z = 0.5 * math.log((1 + rho) / (1 - rho)) * math.sqrt(n - k - 3)
    stat, p = confcause.fisher_z(rho, n, k)
    assert abs(stat - z) < 1e-10, (stat, z)
    assert abs(p - math.erfc(abs(z) / math.sqrt(2))) < 1e-9


def check_pipeline():
    data, scm, truth = confcause.generate(seed=7, samples=1500)
    assert len(data) == 1500
    assert "y0" in data.names and len(data.column("y0")) == 1500
    assert scm["seed"] == 7

    model = confcause.learn(data, alpha=0.05)
    assert model.directed(), "expected a non-empty model"
    assert model.to_dot().startswith("digraph")

    diagnosis = confcause.diagnose(data, model, "y0", top_k=2)
    assert diagnosis is not None and len(diagnosis["paths"]) <= 2
    fault = next(f for f in truth["faults"] if f["objective"] == "y0")
    found = set(diagnosis["root_causes"]) & set(fault["true_root_causes"])
    print("care root causes", diagnosis["root_causes"], "true", fault["true_root_causes"])
    assert found, "no true root cause recovered"

    baseline = confcause.cbi_rank(data, "y1", top_k=3)
    assert len(baseline["root_causes"]) <= 3

    again = confcause.Dataset(data.to_csv(), json.dumps(data.roles()))
    assert again.column("m0") == data.column("m0")


def check_errors():
    try:
        confcause.Dataset("a,b\n1,2\n", '{"a": {"role": "knob", "kind": "continuous"}}')
    except ValueError as e:
        print("rejected roles:", e)
    else:
        raise AssertionError("malformed roles accepted")


if __name__ == "__main__":
    check_fisher_z()
    check_pipeline()
    check_errors()
    print("smoke test passed")
