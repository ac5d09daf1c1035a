import numpy as np
import pytest

from mlvat import data, numkit, probe, trainer
from mlvat.errors import LayerOutOfRange, ZeroDenominator

PROBE_CFG = trainer.RunConfig(
    mode="sup", target_language="synthetic-0", rho=1.0,
    hidden_dim=16, lr=5e-3, epochs=6, seed=1,
)


def test_expected_layer_mass_at_one():
    assert probe.expected_layer([1.0, 0.0, 0.0, 0.0]) == 1.0


def test_expected_layer_uniform_twelve():
    assert probe.expected_layer([1.0] * 12) == 6.5


def test_expected_layer_zero_denominator():
    with pytest.raises(ZeroDenominator):
        probe.expected_layer([0.5, -0.5])


def test_expected_layer_scale_invariance():
    rng = numkit.make_rng(4)
    for _ in range(100):
        deltas = rng.uniform(-1, 1, size=rng.integers(2, 15))
        if abs(deltas.sum()) < 1e-9:
            continue
        c = float(rng.uniform(0.1, 50.0))
        assert abs(probe.expected_layer(c * deltas) - probe.expected_layer(deltas)) < 1e-9


def test_expected_layer_range_for_nonnegative():
    rng = numkit.make_rng(5)
    for _ in range(50):
        deltas = rng.uniform(0.0, 1.0, size=12)
        if deltas.sum() == 0:
            continue
        e = probe.expected_layer(deltas)
        assert 1.0 <= e <= 12.0


def layered_bundle():
    """Three-layer store: layers 0-1 pure noise, layer 2 the real signal."""
    spec = data.SyntheticSpec(n_per_cluster=50, dim=10, n_labels=4, n_clusters=3,
                              noise_sigma=0.2, center_scale=1.0, seed=21)
    records, signal_store = data.gen_synthetic(spec)
    signal = np.stack([signal_store.lookup(r.id)[0] for r in records])
    noise_rng = numkit.make_rng(99)
    layers = np.stack(
        [noise_rng.standard_normal(signal.shape),
         noise_rng.standard_normal(signal.shape),
         signal],
        axis=1,
    ).astype(np.float32)
    return records, data.EmbeddingStore([r.id for r in records], layers)


def test_layer_eval_finds_signal_layer():
    records, store = layered_bundle()
    noise = probe.layer_eval(store, records, 0, PROBE_CFG)
    signal = probe.layer_eval(store, records, 2, PROBE_CFG)
    assert signal.jaccard > noise.jaccard


def test_layer_eval_out_of_range():
    records, store = layered_bundle()
    with pytest.raises(LayerOutOfRange):
        probe.layer_eval(store, records, 3, PROBE_CFG)
    with pytest.raises(LayerOutOfRange):
        probe.cumulative_layer_eval(store, records, 3, PROBE_CFG)


def test_cumulative_layer_zero_equals_single_layer():
    records, store = layered_bundle()
    single = probe.layer_eval(store, records, 0, PROBE_CFG)
    cumulative = probe.cumulative_layer_eval(store, records, 0, PROBE_CFG)
    assert single == cumulative


def test_cumulative_identical_layers_is_identity():
    records, base = layered_bundle()
    signal = np.stack([base.lookup(r.id)[2] for r in records])
    stacked = np.stack([signal, signal, signal], axis=1).astype(np.float32)
    store = data.EmbeddingStore([r.id for r in records], stacked)
    single = probe.layer_eval(store, records, 0, PROBE_CFG)
    for max_layer in (1, 2):
        assert probe.cumulative_layer_eval(store, records, max_layer, PROBE_CFG) == single


def test_cumulative_curve_all_prefixes():
    records, store = layered_bundle()
    for max_layer in range(store.n_layers):
        r = probe.cumulative_layer_eval(store, records, max_layer, PROBE_CFG)
        assert 0.0 <= r.jaccard <= 1.0


def test_probe_report_and_csv():
    records, store = layered_bundle()
    report = probe.probe_report(store, records, PROBE_CFG)
    assert [l for l, _ in report.per_layer] == [0, 1, 2]
    assert [l for l, _ in report.cumulative] == [0, 1, 2]
    assert report.expected_layer is None or np.isfinite(report.expected_layer)
    text = probe.probe_csv(report)
    assert text.startswith("kind,layer,jaccard,micro_f1,macro_f1\n")
    assert text.count("per_layer,") == 3
    assert text.count("cumulative,") == 3
    if report.expected_layer is not None:
        assert "# expected_layer," in text


def test_probe_report_per_layer_only():
    records, store = layered_bundle()
    report = probe.probe_report(store, records, PROBE_CFG, include_cumulative=False)
    assert report.cumulative == ()
    assert report.expected_layer is None
