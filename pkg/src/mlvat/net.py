"""Two-layer classifier head: linear -> tanh -> dropout -> linear.

Forward passes record everything backward needs in a ForwardTrace, and
backward returns exact reverse-mode gradients for every parameter plus
the gradient with respect to the input rows (the hook the adversarial
perturbation needs). The optimizer is Adam with decoupled weight decay.
All update functions are pure: they return fresh objects and never
mutate their arguments.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, ShapeMismatch, TruncatedFile, VersionUnsupported

CHECKPOINT_MAGIC = b"MLVP"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpParams:
    w1: np.ndarray  # d_in x d_hidden
    b1: np.ndarray  # d_hidden
    w2: np.ndarray  # d_hidden x d_out
    b2: np.ndarray  # d_out

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]

    @property
    def d_hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def d_out(self) -> int:
        return self.w2.shape[1]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass(frozen=True)
class MlpGrads:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    grad_input: np.ndarray | None  # batch x d_in; None for combined losses

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass(frozen=True)
class ForwardTrace:
    x: np.ndarray        # batch x d_in
    hidden: np.ndarray   # batch x d_hidden, tanh outputs
    mask: np.ndarray     # batch x d_hidden, entries in {0, 1/(1-p)}
    dropped: np.ndarray  # batch x d_hidden, hidden * mask
    logits: np.ndarray   # batch x d_out


@dataclass(frozen=True)
class OptimizerState:
    step: int
    m: MlpParams
    v: MlpParams
    lr: float
    beta1: float
    beta2: float
    eps_adam: float
    weight_decay: float


def init_params(rng: np.random.Generator, d_in: int, d_hidden: int, d_out: int) -> MlpParams:
    """Xavier-uniform weights, zero biases."""
    if min(d_in, d_hidden, d_out) < 1:
        raise ShapeMismatch(f"dims must be >= 1, got ({d_in}, {d_hidden}, {d_out})")

    def xavier(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return MlpParams(
        w1=xavier(d_in, d_hidden),
        b1=np.zeros(d_hidden),
        w2=xavier(d_hidden, d_out),
        b2=np.zeros(d_out),
    )


def forward(
    params: MlpParams,
    x: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout: float = 0.1,
) -> ForwardTrace:
    """Run the head on a batch. Train mode applies inverted dropout."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.d_in:
        raise ShapeMismatch(f"input shape {x.shape} incompatible with d_in={params.d_in}")
    if mode not in ("train", "eval"):
        raise ShapeMismatch(f"mode must be 'train' or 'eval', got {mode!r}")

    hidden = np.tanh(x @ params.w1 + params.b1)
    if mode == "train":
        if rng is None:
            raise ShapeMismatch("train-mode forward needs an rng for the dropout mask")
        keep = rng.random(hidden.shape) >= dropout
        mask = keep / (1.0 - dropout)
    else:
        mask = np.ones_like(hidden)
    dropped = hidden * mask
    logits = dropped @ params.w2 + params.b2
    return ForwardTrace(x=x, hidden=hidden, mask=mask, dropped=dropped, logits=logits)


def backward(params: MlpParams, trace: ForwardTrace, d_logits: np.ndarray) -> MlpGrads:
    """Exact gradients of the traced forward pass given dLoss/dLogits.

    No batch reduction happens here; whatever 1/batch factors the loss
    uses must already be inside d_logits.
    """
    d_logits = np.asarray(d_logits, dtype=np.float64)
    if d_logits.shape != trace.logits.shape:
        raise ShapeMismatch(
            f"d_logits shape {d_logits.shape} != logits shape {trace.logits.shape}"
        )
    g_w2 = trace.dropped.T @ d_logits
    g_b2 = d_logits.sum(axis=0)
    d_dropped = d_logits @ params.w2.T
    d_hidden = d_dropped * trace.mask
    d_pre = d_hidden * (1.0 - trace.hidden**2)  # tanh'(z) = 1 - tanh(z)^2
    g_w1 = trace.x.T @ d_pre
    g_b1 = d_pre.sum(axis=0)
    grad_input = d_pre @ params.w1.T
    return MlpGrads(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2, grad_input=grad_input)


def zero_grads(params: MlpParams) -> MlpGrads:
    return MlpGrads(
        w1=np.zeros_like(params.w1),
        b1=np.zeros_like(params.b1),
        w2=np.zeros_like(params.w2),
        b2=np.zeros_like(params.b2),
        grad_input=None,
    )


def add_grads(a: MlpGrads, b: MlpGrads, scale_b: float = 1.0) -> MlpGrads:
    """a + scale_b * b over the parameter gradients (grad_input dropped)."""
    return MlpGrads(
        w1=a.w1 + scale_b * b.w1,
        b1=a.b1 + scale_b * b.b1,
        w2=a.w2 + scale_b * b.w2,
        b2=a.b2 + scale_b * b.b2,
        grad_input=None,
    )


def init_optimizer(
    params: MlpParams,
    lr: float = 2e-5,
    weight_decay: float = 0.01,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_adam: float = 1e-8,
) -> OptimizerState:
    zeros = MlpParams(*[np.zeros_like(a) for a in params.arrays()])
    zeros2 = MlpParams(*[np.zeros_like(a) for a in params.arrays()])
    return OptimizerState(
        step=0, m=zeros, v=zeros2, lr=lr, beta1=beta1, beta2=beta2,
        eps_adam=eps_adam, weight_decay=weight_decay,
    )


def adamw_step(
    state: OptimizerState, params: MlpParams, grads: MlpGrads
) -> tuple[OptimizerState, MlpParams]:
    """One Adam update with decoupled weight decay.

    The decay term lr * wd * param is subtracted separately from the
    bias-corrected Adam step, so a zero gradient still shrinks weights.
    """
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param shape {p.shape} != grad shape {g.shape}")
        m2 = state.beta1 * m + (1.0 - state.beta1) * g
        v2 = state.beta2 * v + (1.0 - state.beta2) * g**2
        update = state.lr * (m2 / bc1) / (np.sqrt(v2 / bc2) + state.eps_adam)
        new_m.append(m2)
        new_v.append(v2)
        new_p.append(p - update - state.lr * state.weight_decay * p)
    next_state = OptimizerState(
        step=t, m=MlpParams(*new_m), v=MlpParams(*new_v), lr=state.lr,
        beta1=state.beta1, beta2=state.beta2, eps_adam=state.eps_adam,
        weight_decay=state.weight_decay,
    )
    return next_state, MlpParams(*new_p)


def save_params(path, params: MlpParams) -> None:
    """Write an MLVP checkpoint: magic, version, dims, then w1 b1 w2 b2."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<IIII", CHECKPOINT_VERSION, params.d_in, params.d_hidden, params.d_out))
        for a in params.arrays():
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path) -> MlpParams:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 20:
        raise TruncatedFile(f"{path}: header incomplete")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path}: expected {CHECKPOINT_MAGIC!r}, got {blob[:4]!r}")
    version, d_in, d_hidden, d_out = struct.unpack("<IIII", blob[4:20])
    if version != CHECKPOINT_VERSION:
        raise VersionUnsupported(f"{path}: version {version}")
    counts = [d_in * d_hidden, d_hidden, d_hidden * d_out, d_out]
    expected = 20 + 8 * sum(counts)
    if len(blob) != expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(blob)}")
    offset = 20
    arrays = []
    for n in counts:
        arrays.append(np.frombuffer(blob, dtype="<f8", count=n, offset=offset).astype(np.float64))
        offset += 8 * n
    return MlpParams(
        w1=arrays[0].reshape(d_in, d_hidden),
        b1=arrays[1],
        w2=arrays[2].reshape(d_hidden, d_out),
        b2=arrays[3],
    )
