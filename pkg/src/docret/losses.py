"""Contrastive training objectives as pure functions with analytic gradients.

Nothing here updates parameters; the losses exist so their formulas can be
evaluated and their gradients verified against finite differences. All
similarities are true cosines (inputs need not be pre-normalized; the
normalization is part of the differentiated computation). Arithmetic is
float64 throughout.

Gradient convention at MaxSim ties: when two document tokens achieve the
same per-query-token maximum, the gradient flows to the lowest-index row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateBatch, DimError, MissingNegatives, ZeroVector


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.02
    lam: float = 0.5
    matryoshka_dims: Tuple[int, ...] = (768, 1536, 2560)
    matryoshka_weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0,1], got {self.lam}")
        dims = tuple(self.matryoshka_dims)
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise ValueError(f"matryoshka dims must be strictly ascending, got {dims}")
        if self.matryoshka_weights is not None:
            w = tuple(float(x) for x in self.matryoshka_weights)
            if len(w) != len(dims):
                raise ValueError("one weight per matryoshka dim required")
            if any(x <= 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                raise ValueError("matryoshka weights must be positive and sum to 1")

    def weights(self) -> Tuple[float, ...]:
        if self.matryoshka_weights is not None:
            return tuple(float(x) for x in self.matryoshka_weights)
        n = len(self.matryoshka_dims)
        return tuple(1.0 / n for _ in range(n))


@dataclass
class LossBatch:
    """Dense batch: B queries, B positives, optional B x K hard negatives."""

    queries: np.ndarray
    positives: np.ndarray
    negatives: Optional[np.ndarray] = None

    def __post_init__(self):
        self.queries = np.asarray(self.queries, dtype=np.float64)
        self.positives = np.asarray(self.positives, dtype=np.float64)
        if self.queries.ndim != 2 or self.queries.shape != self.positives.shape:
            raise DegenerateBatch(
                f"queries {self.queries.shape} and positives {self.positives.shape} must match"
            )
        if self.queries.shape[0] < 1:
            raise DegenerateBatch("batch must contain at least one pair")
        if self.negatives is not None:
            self.negatives = np.asarray(self.negatives, dtype=np.float64)
            b, d = self.queries.shape
            if self.negatives.ndim != 3 or self.negatives.shape[0] != b or self.negatives.shape[2] != d:
                raise DegenerateBatch(f"negatives shape {self.negatives.shape} incompatible with (B={b}, K, d={d})")

    @property
    def size(self) -> int:
        return self.queries.shape[0]

    @property
    def n_negatives(self) -> int:
        return 0 if self.negatives is None else self.negatives.shape[1]


@dataclass
class MultiVectorBatch:
    """Late-interaction batch: per-item token matrices."""

    queries: List[np.ndarray]
    positives: List[np.ndarray]

    def __post_init__(self):
        self.queries = [np.asarray(q, dtype=np.float64) for q in self.queries]
        self.positives = [np.asarray(d, dtype=np.float64) for d in self.positives]
        if len(self.queries) != len(self.positives) or not self.queries:
            raise DegenerateBatch("need equal, nonzero numbers of queries and positives")

    @property
    def size(self) -> int:
        return len(self.queries)


@dataclass
class LossOutput:
    value: float
    grad_queries: object
    grad_positives: object
    grad_negatives: object = None


# -- internals -------------------------------------------------------------


def _unitize(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=-1)
    if np.any(norms == 0.0):
        raise ZeroVector("zero vector in loss batch")
    return x / norms[..., None], norms


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _infonce_from_cosines(c: np.ndarray, tau: float) -> Tuple[float, np.ndarray]:
    """Value and dL/dC for InfoNCE over a B x B cosine matrix."""
    b = c.shape[0]
    z = c / tau
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    value = float(np.mean(lse - np.diag(z)))
    grad_c = (_softmax_rows(z) - np.eye(b)) / (b * tau)
    return value, grad_c


def _pair_cosine_grads(c: np.ndarray, ah: np.ndarray, bh: np.ndarray,
                       an: np.ndarray, bn: np.ndarray, g: np.ndarray):
    """Backprop elementwise cosines c = <ah, bh> with upstream g (same shape)."""
    grad_a = g[..., None] * (bh - c[..., None] * ah) / an[..., None]
    grad_b = g[..., None] * (ah - c[..., None] * bh) / bn[..., None]
    return grad_a, grad_b


def _matrix_cosine_grads(c, qh, dh, qn, dn, g):
    """Backprop the full B x B cosine matrix C = Qh @ Dh.T with upstream g."""
    grad_q = (g @ dh - (g * c).sum(axis=1)[:, None] * qh) / qn[:, None]
    grad_d = (g.T @ qh - (g * c).sum(axis=0)[:, None] * dh) / dn[:, None]
    return grad_q, grad_d


# -- dense losses ----------------------------------------------------------


def bi_encoder_loss(batch: LossBatch, config: LossConfig) -> LossOutput:
    """InfoNCE with in-batch negatives over cosine similarities."""
    qh, qn = _unitize(batch.queries)
    dh, dn = _unitize(batch.positives)
    c = qh @ dh.T
    value, grad_c = _infonce_from_cosines(c, config.tau)
    grad_q, grad_d = _matrix_cosine_grads(c, qh, dh, qn, dn, grad_c)
    grad_n = None if batch.negatives is None else np.zeros_like(batch.negatives)
    return LossOutput(value, grad_q, grad_d, grad_n)


def bi_negative_ce_loss(batch: LossBatch, config: LossConfig) -> LossOutput:
    """(1 - lambda) * mean softplus((s_neg - s_pos)/tau) + lambda * InfoNCE.

    Hard negatives enter only the pairwise term; the InfoNCE denominator
    stays over in-batch positives.
    """
    if batch.negatives is None or batch.n_negatives == 0:
        raise MissingNegatives("bi_negative_ce_loss requires K >= 1 hard negatives")
    b, k = batch.size, batch.n_negatives
    lam, tau = config.lam, config.tau

    qh, qn = _unitize(batch.queries)
    dh, dn = _unitize(batch.positives)
    nh, nn = _unitize(batch.negatives)

    # pairwise ranking term
    c_pos = np.einsum("bd,bd->b", qh, dh)
    c_neg = np.einsum("bd,bkd->bk", qh, nh)
    x = (c_neg - c_pos[:, None]) / tau
    pairwise = float(np.mean(np.logaddexp(0.0, x)))
    sig = 1.0 / (1.0 + np.exp(-x))
    g_neg = (1.0 - lam) * sig / (b * k * tau)
    g_pos = -g_neg.sum(axis=1)

    grad_q_pair_n, grad_n = _pair_cosine_grads(c_neg, qh[:, None, :], nh, qn[:, None], nn, g_neg)
    grad_q_pair_p, grad_d_pair = _pair_cosine_grads(c_pos, qh, dh, qn, dn, g_pos)
    grad_q = grad_q_pair_n.sum(axis=1) + grad_q_pair_p
    grad_d = grad_d_pair

    # InfoNCE term
    c = qh @ dh.T
    info_value, grad_c = _infonce_from_cosines(c, tau)
    gq, gd = _matrix_cosine_grads(c, qh, dh, qn, dn, lam * grad_c)
    grad_q += gq
    grad_d += gd

    value = (1.0 - lam) * pairwise + lam * info_value
    return LossOutput(value, grad_q, grad_d, grad_n)


def matryoshka_wrap(
    base_loss: Callable[[LossBatch, LossConfig], LossOutput],
    batch: LossBatch,
    config: LossConfig,
) -> LossOutput:
    """Weighted sum of the base loss over truncated-and-renormalized prefixes.

    Gradients chain through the truncation and renormalization, so they
    accumulate onto the full-width input vectors.
    """
    full_dim = batch.queries.shape[1]
    for d in config.matryoshka_dims:
        if d > full_dim:
            raise DimError(f"matryoshka dim {d} exceeds embedding dim {full_dim}")

    arrays = {"queries": batch.queries, "positives": batch.positives}
    if batch.negatives is not None:
        arrays["negatives"] = batch.negatives
    grads = {name: np.zeros_like(arr) for name, arr in arrays.items()}

    value = 0.0
    for d, wt in zip(config.matryoshka_dims, config.weights()):
        units, chains = {}, {}
        for name, arr in arrays.items():
            u = arr[..., :d]
            uh, un = _unitize(u)
            units[name] = uh
            chains[name] = (uh, un)
        sub = LossBatch(
            queries=units["queries"],
            positives=units["positives"],
            negatives=units.get("negatives"),
        )
        out = base_loss(sub, config)
        value += wt * out.value
        sub_grads = {"queries": out.grad_queries, "positives": out.grad_positives}
        if "negatives" in arrays and out.grad_negatives is not None:
            sub_grads["negatives"] = out.grad_negatives
        for name, g in sub_grads.items():
            uh, un = chains[name]
            # back through w = u / |u|:  dL/du = (g - <g, w> w) / |u|
            proj = np.sum(g * uh, axis=-1, keepdims=True)
            grads[name][..., :d] += wt * (g - proj * uh) / un[..., None]

    return LossOutput(value, grads["queries"], grads["positives"], grads.get("negatives"))


# -- late interaction ------------------------------------------------------


def _maxsim_value(qh, dh) -> Tuple[float, np.ndarray, np.ndarray]:
    m = qh @ dh.T
    am = np.argmax(m, axis=1)  # lowest index on ties
    return float(m[np.arange(m.shape[0]), am].sum()), m, am


def late_interaction_loss(
    batch: MultiVectorBatch,
    config: LossConfig,
    normalized: bool = True,
) -> LossOutput:
    """InfoNCE over the in-batch MaxSim matrix, optionally query-length normalized."""
    b = batch.size
    tau = config.tau
    q_units = [_unitize(q) for q in batch.queries]
    d_units = [_unitize(d) for d in batch.positives]

    s = np.zeros((b, b))
    for i, (qh, _) in enumerate(q_units):
        for j, (dh, _) in enumerate(d_units):
            val, _, _ = _maxsim_value(qh, dh)
            s[i, j] = val / qh.shape[0] if normalized else val

    value, grad_s = _infonce_from_cosines(s, tau)

    grad_q = [np.zeros_like(q) for q in batch.queries]
    grad_d = [np.zeros_like(d) for d in batch.positives]
    for i, (qh, qn) in enumerate(q_units):
        for j, (dh, dn) in enumerate(d_units):
            g = grad_s[i, j]
            if g == 0.0:
                continue
            if normalized:
                g = g / qh.shape[0]
            _, m, am = _maxsim_value(qh, dh)
            rows = np.arange(qh.shape[0])
            c = m[rows, am]
            # token-level cosine backprop through the argmax routing
            grad_q[i] += g * (dh[am] - c[:, None] * qh) / qn[:, None]
            np.add.at(grad_d[j], am, g * (qh - c[:, None] * dh[am]) / dn[am][:, None])

    return LossOutput(value, grad_q, grad_d)
