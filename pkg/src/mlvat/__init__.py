"""Semi-supervised multilabel classification with virtual adversarial
training over frozen sentence representations."""

from .data import (
    BatchComposer,
    BatchPlan,
    DataBundle,
    EmbeddingStore,
    LabeledRecord,
    SemiSupSplit,
    SyntheticSpec,
    gen_synthetic,
    load_bundle,
    make_semisup_split,
    open_embeddings,
    parse_dataset,
    standard_benchmark_spec,
    write_bundle,
    write_store,
)
from .metrics import MetricReport, jaccard_index, macro_f1, micro_f1, predict_labels
from .net import (
    ForwardTrace,
    MlpGrads,
    MlpParams,
    OptimizerState,
    adamw_step,
    backward,
    forward,
    init_optimizer,
    init_params,
    load_params,
    save_params,
)
from .numkit import (
    bce_with_logits,
    l2_normalize,
    make_rng,
    mse,
    sample_unit_vector,
    split_rng,
    stable_sigmoid,
)
from .probe import LayerEvalReport, cumulative_layer_eval, expected_layer, layer_eval, probe_report
from .trainer import (
    RunConfig,
    RunResult,
    evaluate,
    run_seeds,
    standard_benchmark_config,
    sweep,
    train,
    train_mlvat,
    train_supervised,
)
from .vat import VatConfig, compute_r_vadv, divergence, mlvat_loss, vadv_loss

__version__ = "0.1.0"
