//! Drives the bindings through an embedded interpreter.

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) {
    pyo3::prepare_freethreaded_python();
    Python::with_gil(|py| {
        let globals = PyDict::new_bound(py);
        globals.set_item("l2e", pyo3::wrap_pymodule!(l2e::l2e)(py)).unwrap();
        if let Err(e) = py.run_bound(code, Some(&globals), None) {
            e.print(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn policy_basics() {
    run(r#"
p = l2e.Policy("leduc", seed=3)
assert p.sizes == [7, 64, 64, 4]
assert len(p) == len(p.parameters())
probs = p.probs([1, 1, 0, 0.5, 0, 0, 0.1], legal=[1, 3])
assert abs(sum(probs) - 1) < 1e-12 and probs[0] == 0 and probs[2] == 0
assert l2e.Policy("leduc", seed=3).parameters() == p.parameters()
try:
    p.probs([0] * 7, legal=[9])
    raise AssertionError("illegal action accepted")
except ValueError:
    pass
"#);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.bin");
    run(&format!(
        r#"
p = l2e.Policy("soccer", seed=1)
p.save({path:?})
q = l2e.Policy.load({path:?})
assert q.game == "soccer" and q.parameters() == p.parameters()
"#,
        path = path.to_str().unwrap()
    ));
}

#[test]
fn config_overrides_and_errors() {
    run(r#"
text = l2e.resolve_config("rps", overrides={"epochs": 7, "osg.alpha": 0.3})
assert "epochs = 7" in text and "alpha = 0.3" in text
for bad in ({"epochs": -1}, {"nonsense": 1}, {"osg.n_diverse": 9}):
    try:
        l2e.resolve_config("rps", overrides=bad)
        raise AssertionError(bad)
    except ValueError:
        pass
"#);
}

#[test]
fn tiny_training_and_adaptation() {
    run(r#"
over = {"epochs": 2, "opponents_per_batch": 2, "trajs_per_opponent": 4,
        "hard_epochs": 1, "diverse_steps": 1, "n_diverse": 2, "history_episodes": 5}
p, metric = l2e.train("rps", seed=2, overrides=over)
assert [e for e, _ in metric] == [1, 2]
q, _ = l2e.train("rps", seed=2, overrides=over)
assert p.parameters() == q.parameters()
curve = l2e.test_adapt(p, "rocks", episodes=50, seeds=2)
assert len(curve) == 4
"#);
}

#[test]
fn cfr_and_mmd() {
    run(r#"
assert l2e.cfr_exploitability("rps", 1000) < 1e-6
assert abs(l2e.mmd2([[0.0], [1.0], [2.0]], [[0.0], [1.0], [2.0]])) < 1e-12
assert l2e.mmd2([[0.0], [0.1], [0.2]], [[5.0], [5.1], [5.2]]) > 0.5
"#);
}
