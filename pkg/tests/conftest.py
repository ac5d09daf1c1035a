import pytest

from mlvat import data


@pytest.fixture(scope="session")
def benchmark_bundle():
    """The standard 4-cluster, 3-domain synthetic corpus (seed 0)."""
    records, store = data.gen_synthetic(data.standard_benchmark_spec(seed=0))
    return data.DataBundle(records=records, store=store)


@pytest.fixture(scope="session")
def tiny_bundle():
    """Small single-domain corpus for fast trainer/CLI tests."""
    spec = data.SyntheticSpec(
        n_per_cluster=40, dim=8, n_labels=4, n_clusters=3,
        noise_sigma=0.3, domains=("synthetic-0", "synthetic-1"),
        domain_shift_sigma=0.2, center_scale=0.8, seed=7,
    )
    records, store = data.gen_synthetic(spec)
    return data.DataBundle(records=records, store=store)
