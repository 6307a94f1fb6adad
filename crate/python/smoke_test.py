"""Smoke test for the reward_sgd extension module."""

import math
import tempfile
from pathlib import Path

import reward_sgd

SMALL = {
    "synth.n_pos": "60",
    "synth.n_neg": "240",
    "synth.n_unlabeled_pos": "20",
    "synth.n_unlabeled_neg": "80",
    "synth.n_eval_pos": "40",
    "synth.n_eval_neg": "160",
    "synth.dim": "8",
    "train.total_steps": "200",
    "train.eval_every": "50",
}


def main():
    ds = reward_sgd.Dataset.synthetic(seed=3, config=SMALL)
    sizes = ds.sizes()
    assert sizes["crowd"] == 300 and sizes["eval"] == 200, sizes
    assert ds.dim == 8
    assert 0.0 <= ds.noise_ratio() <= 1.0
    assert len(ds.fingerprint()) == 64
    assert ds.fingerprint() == reward_sgd.Dataset.synthetic(seed=3, config=SMALL).fingerprint()

    model, report, history = reward_sgd.train(ds, method="egal", seed=0, config=SMALL)
    assert len(history) == 4, len(history)
    for key in ("accuracy", "f1", "bacc", "auc"):
        assert 0.0 <= report[key] <= 1.0, (key, report[key])
    assert report == {**report, **model.evaluate_dataset(ds)}

    again, report2, _ = reward_sgd.train(ds, method="egal", seed=0, config=SMALL)
    assert again.params == model.params and report2 == report

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.txt"
        model.save(path)
        assert reward_sgd.Model.load(path).params == model.params
        ds.save(Path(tmp) / "data")
        assert (Path(tmp) / "data" / "truth.tsv").exists()

    m = reward_sgd.Model(2)
    probs = m.predict_proba([[0.0, 0.0], [1.0, -1.0]])
    assert len(probs) == 2 and math.isclose(probs[0], 0.5, abs_tol=0.05)
    metrics = m.evaluate([[1.0, 0.0], [0.0, 1.0]], [1, 0])
    assert set(metrics) >= {"accuracy", "bacc", "auc"}

    assert reward_sgd.auc_estimate([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert reward_sgd.auc_estimate([0.5, 0.5], [0, 1]) == 0.5
    assert reward_sgd.rectify([-1.0, 0.0, 2.5]) == [0.0, 0.0, 2.5]
    assert math.isclose(sum(reward_sgd.normalize([1.0, 3.0])), 1.0, rel_tol=1e-9)
    assert reward_sgd.imbalance_ratio([1, 0, 0, 0]) == 3.0
    assert len(reward_sgd.hash_features("the quick fox", dimension=256)) > 0

    try:
        reward_sgd.train(ds, method="nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
