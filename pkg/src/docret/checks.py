"""Self-check drivers shared by the CLI and the test suite."""

from __future__ import annotations

from typing import Dict

import numpy as np

from . import losses, oracles
from .losses import LossBatch, LossConfig, MultiVectorBatch


def _rel_err(pairs) -> float:
    """Worst absolute deviation over a scale shared by the whole gradient.

    The shared scale matters at small tau: a saturated softmax row makes
    one token's entire gradient block vanish, and dividing the finite
    difference roundoff in that block by its own (near-zero) magnitude
    would report noise as error.
    """
    diff = 0.0
    scale = 1e-8
    for analytic, numeric in pairs:
        a = np.asarray(analytic)
        f = np.asarray(numeric)
        diff = max(diff, float(np.max(np.abs(a - f))))
        scale = max(scale, float(np.max(np.abs(f))))
    return diff / scale


def gradient_check(trials: int = 20, seed: int = 42, tau: float = 0.02,
                   step: float = 1e-5) -> Dict[str, float]:
    """Max relative error of analytic vs finite-difference gradients.

    Random small batches (dim <= 16, B <= 4, K <= 2) for each of the four
    losses. Returns one worst-case number per loss.
    """
    rng = np.random.default_rng(seed)
    worst = {"bi_encoder": 0.0, "bi_negative_ce": 0.0, "matryoshka": 0.0, "late_interaction": 0.0}

    for _ in range(trials):
        b = int(rng.integers(2, 5))
        k = int(rng.integers(1, 3))
        dim = int(rng.integers(6, 17))
        cfg = LossConfig(tau=tau, lam=float(rng.uniform(0.1, 0.9)),
                         matryoshka_dims=(max(2, dim // 3), max(3, dim // 2), dim))
        q = rng.standard_normal((b, dim))
        p = rng.standard_normal((b, dim))
        n = rng.standard_normal((b, k, dim))

        # bi_encoder
        out = losses.bi_encoder_loss(LossBatch(q, p), cfg)
        fd = oracles.oracle_grad(
            lambda arrs: losses.bi_encoder_loss(LossBatch(arrs[0], arrs[1]), cfg).value,
            [q, p], step=step)
        worst["bi_encoder"] = max(worst["bi_encoder"], _rel_err(
            [(out.grad_queries, fd[0]), (out.grad_positives, fd[1])]))

        # bi_negative_ce
        out = losses.bi_negative_ce_loss(LossBatch(q, p, n), cfg)
        fd = oracles.oracle_grad(
            lambda arrs: losses.bi_negative_ce_loss(
                LossBatch(arrs[0], arrs[1], arrs[2].reshape(b, k, dim)), cfg).value,
            [q, p, n], step=step)
        worst["bi_negative_ce"] = max(worst["bi_negative_ce"], _rel_err(
            [(out.grad_queries, fd[0]), (out.grad_positives, fd[1]),
             (out.grad_negatives, fd[2])]))

        # matryoshka wrapper around bi_encoder
        out = losses.matryoshka_wrap(losses.bi_encoder_loss, LossBatch(q, p), cfg)
        fd = oracles.oracle_grad(
            lambda arrs: losses.matryoshka_wrap(
                losses.bi_encoder_loss, LossBatch(arrs[0], arrs[1]), cfg).value,
            [q, p], step=step)
        worst["matryoshka"] = max(worst["matryoshka"], _rel_err(
            [(out.grad_queries, fd[0]), (out.grad_positives, fd[1])]))

        # late interaction: token counts vary per item
        nq = [int(rng.integers(1, 4)) for _ in range(b)]
        nd = [int(rng.integers(1, 5)) for _ in range(b)]
        mq = [rng.standard_normal((t, dim)) for t in nq]
        md = [rng.standard_normal((t, dim)) for t in nd]

        def li_value(arrs):
            qs = arrs[:b]
            ds = arrs[b:]
            return losses.late_interaction_loss(
                MultiVectorBatch(list(qs), list(ds)), cfg, normalized=True).value

        out = losses.late_interaction_loss(MultiVectorBatch(mq, md), cfg, normalized=True)
        fd = oracles.oracle_grad(li_value, mq + md, step=step)
        worst["late_interaction"] = max(worst["late_interaction"], _rel_err(
            list(zip(out.grad_queries + out.grad_positives, fd))))

    return worst
