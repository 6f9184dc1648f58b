"""Smoke test for the dsa extension module.

Build and install first, e.g. `pip install ./crates/py` or `maturin develop --release -m crates/py/Cargo.toml`.
"""

import random

import dsa


def main():
    smib = dsa.Network.bundled("smib.json")
    pf = dsa.power_flow(smib)
    assert pf.max_mismatch < 1e-8, pf.max_mismatch
    print(f"{smib!r}: power flow in {pf.iterations} iterations")

    fault = dsa.Contingency([0], t_fault=1.0, t_clear=1.05)
    trace = dsa.simulate(smib, pf, fault, t_end=5.0)
    label = dsa.label(trace)
    assert label["secure"], label
    assert abs(dsa.tsi_from_delta(0.0) - 100.0) < 1e-12
    print(f"short fault: TSI {label['tsi_percent']:.1f}%, secure={label['secure']}")

    ieee = dsa.Network.bundled("ieee118.json")
    buses, optimal = dsa.placement(ieee)
    assert optimal and len(buses) == 32, (len(buses), optimal)
    assert dsa.is_observable(ieee, buses)
    print(f"IEEE-118 placement: {len(buses)} PMUs")

    rng = random.Random(0)
    x = [[rng.uniform(-1, 1), rng.uniform(-1, 1)] for _ in range(200)]
    y = [1 if a + b > 0 else 0 for a, b in x]
    for alg in ("cart", "rf", "svm", "mlp"):
        model = dsa.train(alg, x[:120], y[:120], x[120:150], y[120:150], seed=1)
        acc = model.score(x[150:], y[150:])
        again = dsa.Classifier.from_json(model.to_json())
        assert again.predict(x[150:]) == model.predict(x[150:])
        assert acc >= 0.75, (alg, acc)
        print(f"{alg}: held-out accuracy {acc:.2f}")

    try:
        dsa.Network.load("/nonexistent.json")
    except dsa.DsaError as e:
        print(f"missing file raises DsaError: {e}")
    else:
        raise AssertionError("expected DsaError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
