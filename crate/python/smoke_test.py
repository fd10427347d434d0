"""Smoke test for the `l2e` extension module.

Build the module first, either with maturin:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

or with cargo alone:

    cargo build --release -p l2e-py --features extension-module
    cp target/release/libl2e.so python/l2e.so
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import l2e


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok: {what}")


def main():
    check(set(l2e.GAMES) == {"rps", "leduc", "bigleduc", "soccer"}, "games listed")

    p = l2e.Policy("leduc", seed=3)
    check(p.sizes == [7, 64, 64, 4], "leduc policy shape")
    probs = p.probs([1, 1, 0, 0.5, 0, 0, 0.1], legal=[1, 3])
    check(abs(sum(probs) - 1) < 1e-12 and probs[0] == 0 and probs[2] == 0, "masked softmax")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "p.bin")
        p.save(path)
        q = l2e.Policy.load(path)
        check(q.parameters() == p.parameters(), "checkpoint round trip")

    text = l2e.resolve_config("leduc", overrides={"epochs": 5, "osg.alpha": 0.2})
    check("epochs = 5" in text and "alpha_mmd = 0.8" in text, "config resolution")
    try:
        l2e.resolve_config("leduc", overrides={"epochs": -1})
        check(False, "negative epochs rejected")
    except ValueError as e:
        check("epochs" in str(e), "negative epochs rejected")

    expl = l2e.cfr_exploitability("rps", 1000)
    check(abs(expl) < 1e-9, "rps cfr exploitability")

    a = [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]
    check(abs(l2e.mmd2(a, a)) < 1e-12, "mmd2(A, A) = 0")
    check(l2e.mmd2(a, [[5.0, 5.0], [6.0, 5.0], [5.0, 6.0]]) > 0.1, "mmd2 separates sets")

    overrides = {
        "epochs": 2,
        "opponents_per_batch": 4,
        "hard_epochs": 2,
        "diverse_steps": 2,
        "history_episodes": 10,
    }
    base, metric = l2e.train("rps", seed=1, overrides=overrides)
    check(len(metric) == 2, "training history")
    curve = l2e.test_adapt(base, "rocks", episodes=50, seeds=2)
    check(len(curve) == 4 and all(math.isfinite(m) for m, _ in curve), "adaptation curve")
    print("smoke test passed")


if __name__ == "__main__":
    main()
