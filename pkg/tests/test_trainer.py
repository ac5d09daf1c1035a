import json
from dataclasses import replace

import numpy as np
import pytest

from mlvat import data, metrics, net, numkit, trainer
from mlvat.errors import ConfigError

FIELDS = ("w1", "b1", "w2", "b2")


def tiny_cfg(mode="sup", **kw):
    base = trainer.RunConfig(
        mode=mode, target_language="synthetic-0", rho=0.5,
        hidden_dim=16, lr=5e-3, epochs=4, labeled_batch=8,
        unlabeled_batch=12, seed=1,
    )
    return replace(base, **kw)


def test_config_validation():
    with pytest.raises(ConfigError):
        trainer.RunConfig(mode="bogus")
    with pytest.raises(ConfigError):
        trainer.RunConfig(rho=0.0)
    with pytest.raises(ConfigError):
        trainer.RunConfig(eval_split="validation")
    with pytest.raises(ConfigError):
        trainer.train_supervised(tiny_cfg("mlvat"), None)
    with pytest.raises(ConfigError):
        trainer.train_mlvat(tiny_cfg("sup"), None)


def test_config_kv_round_trip(tmp_path):
    cfg = tiny_cfg("mlvat", eval_language="synthetic-1",
                   unlabeled_sources=("synthetic-1",), feature_layer=0,
                   train_on_train_plus_dev=True)
    path = tmp_path / "run.cfg"
    trainer.save_config_kv(path, cfg)
    assert trainer.load_config_kv(path) == cfg


def test_config_kv_none_fields(tmp_path):
    cfg = tiny_cfg()
    path = tmp_path / "run.cfg"
    trainer.save_config_kv(path, cfg)
    loaded = trainer.load_config_kv(path)
    assert loaded.eval_language is None
    assert loaded.unlabeled_sources is None
    assert loaded.feature_layer is None


def test_config_kv_empty_sources_distinct_from_none(tmp_path):
    # () = target leftovers only; None = all languages
    path = tmp_path / "run.cfg"
    trainer.save_config_kv(path, tiny_cfg("mlvat", unlabeled_sources=()))
    assert trainer.load_config_kv(path).unlabeled_sources == ()


def test_config_kv_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("nonsense=1\n")
    with pytest.raises(ConfigError):
        trainer.load_config_kv(path)


def test_reduction_identity_bit_exact(tiny_bundle):
    """mlVAT with alpha=0 and no unlabeled rows IS the supervised run."""
    sup = trainer.train_supervised(tiny_cfg("sup", unlabeled_batch=0), tiny_bundle)
    red = trainer.train_mlvat(tiny_cfg("mlvat", alpha=0.0, unlabeled_batch=0), tiny_bundle)
    assert sup.loss_curve == red.loss_curve
    for f in FIELDS:
        np.testing.assert_array_equal(getattr(sup.params, f), getattr(red.params, f))
    assert sup.metrics == red.metrics


def test_run_determinism_byte_identical(tiny_bundle):
    a = trainer.train(tiny_cfg("mlvat"), tiny_bundle)
    b = trainer.train(tiny_cfg("mlvat"), tiny_bundle)
    assert a.record_json() == b.record_json()
    assert a.record_json().encode() == b.record_json().encode()


def test_seeds_change_results(tiny_bundle):
    a = trainer.train(tiny_cfg("mlvat", seed=1), tiny_bundle)
    b = trainer.train(tiny_cfg("mlvat", seed=2), tiny_bundle)
    assert a.loss_curve != b.loss_curve


def test_record_excludes_wall_clock(tiny_bundle):
    result = trainer.train(tiny_cfg(), tiny_bundle)
    record = json.loads(result.record_json())
    assert "wall_clock_sec" not in json.dumps(record)
    assert record["config"]["mode"] == "sup"  # resolved config echoed
    assert set(record) == {"config", "metrics", "loss_curve", "seed"}


def test_evaluate_zero_head_empty_convention():
    # all-negative predictions score JI equal to the share of empty-gold rows
    rng = numkit.make_rng(0)
    ids = [f"r{i}" for i in range(8)]
    store = data.EmbeddingStore(ids, rng.standard_normal((8, 1, 4)).astype(np.float32))
    labels = [(0, 0), (1, 0), (0, 0), (1, 1), (0, 1), (0, 0), (1, 0), (0, 1)]
    records = [data.LabeledRecord(id=i, language="x", labels=l, split="test")
               for i, l in zip(ids, labels)]
    params = net.MlpParams(np.zeros((4, 3)), np.zeros(3), np.zeros((3, 2)), np.zeros(2))
    report = trainer.evaluate(params, records, store)
    assert report.jaccard == 3 / 8
    again = trainer.evaluate(params, records, store)
    assert report == again


def test_evaluate_shards_pool_exactly(tiny_bundle):
    result = trainer.train(tiny_cfg(), tiny_bundle)
    records = tiny_bundle.records_for("synthetic-0", "test")
    assert len(records) > 2
    whole = trainer.evaluate(result.params, records, tiny_bundle.store)
    preds, golds = [], []
    half = len(records) // 2
    for shard in (records[:half], records[half:]):
        x = tiny_bundle.store.matrix([r.id for r in shard])
        logits = net.forward(result.params, x, mode="eval").logits
        preds.append(metrics.predict_labels(logits, whole.threshold))
        golds.append(np.asarray([r.labels for r in shard]))
    merged = metrics.report(np.vstack(golds), np.vstack(preds), whole.threshold)
    assert merged == whole


def test_loss_curve_decreases(tiny_bundle):
    result = trainer.train(tiny_cfg(epochs=10), tiny_bundle)
    assert result.loss_curve[-1] < result.loss_curve[0]


def test_crosslingual_config(tiny_bundle):
    cfg = tiny_cfg("sup", eval_language="synthetic-1")
    result = trainer.train(cfg, tiny_bundle)
    assert 0.0 <= result.metrics.jaccard <= 1.0
    assert result.config["eval_language"] == "synthetic-1"


def test_train_plus_dev_changes_run(tiny_bundle):
    base = trainer.train(tiny_cfg(), tiny_bundle)
    plus = trainer.train(tiny_cfg(train_on_train_plus_dev=True), tiny_bundle)
    assert base.loss_curve != plus.loss_curve


def test_unlabeled_sources_filter(tiny_bundle):
    split = data.make_semisup_split(
        tiny_bundle.records, "synthetic-0", 0.5,
        tiny_bundle.other_language_records("synthetic-0"), seed=1,
    )
    all_ids = trainer._unlabeled_ids(tiny_cfg("mlvat"), tiny_bundle, split)
    only_target = trainer._unlabeled_ids(
        tiny_cfg("mlvat", unlabeled_sources=()), tiny_bundle, split
    )
    assert set(only_target) < set(all_ids)
    assert all(i.startswith("synthetic-0") for i in only_target)


def test_missing_language_raises(tiny_bundle):
    with pytest.raises(ConfigError):
        trainer.train(tiny_cfg(target_language="synthetic-9"), tiny_bundle)


def test_sweep_epsilon_grid(tiny_bundle):
    base = tiny_cfg("mlvat", epochs=2)
    values = [0.1, 0.25, 0.5, 0.75, 1.0]
    results = trainer.sweep(base, "epsilon", values, tiny_bundle)
    assert len(results) == 5
    assert [r.config["epsilon"] for r in results] == values
    for r in results:
        assert np.isfinite(r.loss_curve).all()
        assert np.isfinite(r.metrics.jaccard)
    csv_text = trainer.sweep_csv("epsilon", values, results)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "epsilon,jaccard,micro_f1,macro_f1"
    assert len(lines) == 6


def test_sweep_ratio_axis(tiny_bundle):
    base = tiny_cfg("mlvat", epochs=1)
    results = trainer.sweep(base, "ratio", [1, 2], tiny_bundle)
    assert [r.config["unlabeled_batch"] for r in results] == [8, 16]


def test_sweep_unknown_axis(tiny_bundle):
    with pytest.raises(ConfigError):
        trainer.sweep(tiny_cfg(), "gamma", [1], tiny_bundle)


def test_sweep_parallel_matches_sequential(tiny_bundle):
    base = tiny_cfg("mlvat", epochs=2)
    values = [0.25, 0.75]
    seq = trainer.sweep(base, "epsilon", values, tiny_bundle)
    par = trainer.sweep(base, "epsilon", values, tiny_bundle, jobs=2)
    assert [r.record_json() for r in seq] == [r.record_json() for r in par]


def test_write_results_jsonl_deterministic(tmp_path, tiny_bundle):
    results = [trainer.train(tiny_cfg(seed=s), tiny_bundle) for s in (1, 2)]
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    trainer.write_results_jsonl(p1, results)
    trainer.write_results_jsonl(p2, results)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().strip().split("\n")
    assert len(lines) == 2
    assert json.loads(lines[0])["seed"] == 1


def test_rho_learning_curve_monotone(benchmark_bundle):
    # 5-seed mean JI nondecreasing in rho, 0.5-point slack
    for mode in ("sup", "mlvat"):
        means = []
        for rho in (0.10, 0.25, 0.50, 1.0):
            cfg = replace(trainer.standard_benchmark_config(mode),
                          hidden_dim=64, rho=rho)
            runs = trainer.run_seeds(cfg, benchmark_bundle)
            means.append(100 * np.mean([r.metrics.jaccard for r in runs]))
        for lo, hi in zip(means, means[1:]):
            assert hi >= lo - 0.5, f"{mode} rho curve dropped: {means}"
