"""Virtual adversarial perturbation and the combined multilabel objective.

The adversarial direction for a sample x is found by the fast
approximation: start from r = epsilon * q with q a random unit vector,
take the gradient of the output divergence with respect to r, and
rescale it to radius epsilon. The reference output at x is treated as a
constant throughout, so no gradient ever flows through that branch.

Rows of a batch are independent through the head, so the whole batch is
perturbed in one forward/backward pair; per-row gradients share only a
uniform 1/(batch*labels) factor that cannot change their directions.
Dropout stays off inside every divergence computation here: perturbing
against a stochastic reference would drown the adversarial direction in
mask noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import net
from .errors import EmptyBatch, ShapeMismatch, ZeroNorm
from .numkit import NORM_FLOOR, bce_with_logits, mse, stable_sigmoid

DIVERGENCE_VARIANTS = ("mse_sigmoid", "mse_logits", "kl_per_label")


@dataclass(frozen=True)
class VatConfig:
    epsilon: float = 0.5
    alpha: float = 1.0
    divergence: str = "mse_sigmoid"
    power_iters: int = 1

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ShapeMismatch(f"epsilon must be > 0, got {self.epsilon}")
        if self.alpha < 0:
            raise ShapeMismatch(f"alpha must be >= 0, got {self.alpha}")
        if self.power_iters < 1:
            raise ShapeMismatch(f"power_iters must be >= 1, got {self.power_iters}")
        if self.divergence not in DIVERGENCE_VARIANTS:
            raise ShapeMismatch(
                f"divergence must be one of {DIVERGENCE_VARIANTS}, got {self.divergence!r}"
            )


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def divergence(variant: str, logits_ref: np.ndarray, logits_pert: np.ndarray) -> float:
    """Mean divergence between reference and perturbed outputs.

    kl_per_label treats each sigmoid output as an independent Bernoulli
    and averages KL(sigma(ref) || sigma(pert)) over labels, computed via
    softplus identities so saturated logits stay finite.
    """
    a = np.asarray(logits_ref, dtype=np.float64)
    b = np.asarray(logits_pert, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"ref shape {a.shape} != pert shape {b.shape}")
    if variant == "mse_sigmoid":
        return mse(stable_sigmoid(a), stable_sigmoid(b))
    if variant == "mse_logits":
        return mse(a, b)
    if variant == "kl_per_label":
        p = stable_sigmoid(a)
        # log(p/q) = softplus(-b) - softplus(-a); log((1-p)/(1-q)) = softplus(b) - softplus(a)
        kl = p * (_softplus(-b) - _softplus(-a)) + (1.0 - p) * (_softplus(b) - _softplus(a))
        return float(np.mean(kl))
    raise ShapeMismatch(f"unknown divergence variant {variant!r}")


def divergence_grad(variant: str, logits_ref: np.ndarray, logits_pert: np.ndarray) -> np.ndarray:
    """d divergence / d logits_pert, including the mean-reduction factor."""
    a = np.asarray(logits_ref, dtype=np.float64)
    b = np.asarray(logits_pert, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"ref shape {a.shape} != pert shape {b.shape}")
    scale = 1.0 / a.size
    sa = stable_sigmoid(a)
    sb = stable_sigmoid(b)
    if variant == "mse_sigmoid":
        return scale * 2.0 * (sb - sa) * sb * (1.0 - sb)
    if variant == "mse_logits":
        return scale * 2.0 * (b - a)
    if variant == "kl_per_label":
        # d/db [p*(-log q) + (1-p)*(-log(1-q))] = sigma(b) - p
        return scale * (sb - sa)
    raise ShapeMismatch(f"unknown divergence variant {variant!r}")


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n independent random unit vectors as rows."""
    g = rng.standard_normal((n, dim))
    norms = np.linalg.norm(g, axis=1)
    for _ in range(8):
        bad = norms < NORM_FLOOR
        if not bad.any():
            break
        g[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(g, axis=1)
    else:
        raise ZeroNorm("gaussian draws underflowed 8 times")
    return g / norms[:, None]


def perturbations_for_batch(
    params: net.MlpParams,
    x_batch: np.ndarray,
    cfg: VatConfig,
    rng: np.random.Generator,
    logits_ref: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Adversarial perturbation per row, radius epsilon.

    Returns (r_vadv, valid): rows whose divergence gradient vanished
    (flat model) come back as zeros with valid=False, so they add
    nothing to the adversarial loss instead of aborting the batch.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    n = x_batch.shape[0]
    if logits_ref is None:
        logits_ref = net.forward(params, x_batch, mode="eval").logits
    r = cfg.epsilon * _unit_rows(rng, n, x_batch.shape[1])
    valid = np.ones(n, dtype=bool)
    for _ in range(cfg.power_iters):
        trace = net.forward(params, x_batch + r, mode="eval")
        d_pert = divergence_grad(cfg.divergence, logits_ref, trace.logits)
        g = net.backward(params, trace, d_pert).grad_input
        norms = np.linalg.norm(g, axis=1)
        valid &= norms >= NORM_FLOOR
        r = np.zeros_like(r)
        r[valid] = cfg.epsilon * g[valid] / norms[valid, None]
    return r, valid


def compute_r_vadv(
    params: net.MlpParams, x: np.ndarray, cfg: VatConfig, rng: np.random.Generator
) -> np.ndarray:
    """Adversarial perturbation for a single representation vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch(f"expected 1-d input, got shape {x.shape}")
    r, valid = perturbations_for_batch(params, x[None, :], cfg, rng)
    if not valid[0]:
        raise ZeroNorm("divergence gradient vanished; treat L_vadv as 0 for this sample")
    return r[0]


def vadv_loss(
    params: net.MlpParams,
    x_batch: np.ndarray,
    cfg: VatConfig,
    rng: np.random.Generator,
) -> tuple[float, net.MlpGrads]:
    """Adversarial loss over a batch and its parameter gradients.

    Gradients flow only through the perturbed branch; the reference
    logits are a fixed target. Zero-gradient rows keep r = 0, which
    makes their divergence contribution and gradient exactly zero.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[0] == 0:
        raise EmptyBatch(f"adversarial batch must be nonempty 2-d, got shape {x_batch.shape}")
    logits_ref = net.forward(params, x_batch, mode="eval").logits
    r, _ = perturbations_for_batch(params, x_batch, cfg, rng, logits_ref=logits_ref)
    trace = net.forward(params, x_batch + r, mode="eval")
    loss = divergence(cfg.divergence, logits_ref, trace.logits)
    d_pert = divergence_grad(cfg.divergence, logits_ref, trace.logits)
    grads = net.backward(params, trace, d_pert)
    return loss, grads


def bce_loss(
    params: net.MlpParams,
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator | None = None,
    dropout: float = 0.1,
    mode: str = "train",
) -> tuple[float, net.MlpGrads]:
    """Supervised binary cross entropy over a labeled batch."""
    y = np.asarray(y, dtype=np.float64)
    trace = net.forward(params, x, mode=mode, rng=rng, dropout=dropout)
    loss = bce_with_logits(trace.logits, y)
    d_logits = (stable_sigmoid(trace.logits) - y) / y.size
    return loss, net.backward(params, trace, d_logits)


def mlvat_loss(
    params: net.MlpParams,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: np.ndarray,
    cfg: VatConfig,
    rng: np.random.Generator,
    dropout: float = 0.1,
) -> tuple[float, net.MlpGrads]:
    """Combined objective: supervised BCE plus alpha * adversarial loss.

    The adversarial term covers labeled and unlabeled rows alike; the
    BCE term uses only the labeled rows. With alpha = 0 the adversarial
    branch is skipped entirely (no random draws), so the result and the
    rng stream match plain supervised BCE exactly.
    """
    x_l, y_l = labeled
    x_l = np.asarray(x_l, dtype=np.float64)
    unlabeled = np.asarray(unlabeled, dtype=np.float64)
    n_l = x_l.shape[0] if x_l.size else 0
    n_u = unlabeled.shape[0] if unlabeled.size else 0
    if n_l == 0 and n_u == 0:
        raise EmptyBatch("both labeled and unlabeled batches are empty")

    if n_l > 0:
        loss, grads = bce_loss(params, x_l, y_l, rng=rng, dropout=dropout)
    else:
        loss, grads = 0.0, net.zero_grads(params)

    if cfg.alpha > 0:
        if n_l > 0 and n_u > 0:
            x_all = np.vstack([x_l, unlabeled])
        else:
            x_all = x_l if n_l > 0 else unlabeled
        adv, adv_grads = vadv_loss(params, x_all, cfg, rng)
        loss = loss + cfg.alpha * adv
        grads = net.add_grads(grads, adv_grads, scale_b=cfg.alpha)
    return loss, grads
