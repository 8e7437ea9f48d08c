"""Plot-ready analysis exports: 2D PCA projections, MaxSim heatmaps, and
storage accounting. Outputs are CSV/JSON for external plotting tools; no
figures are rendered here.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import MultiVectorEmbedding
from .errors import DegenerateData, GridMismatch
from .scoring import DenseIndex, MultiVectorIndex, maxsim


@dataclass
class Projection2D:
    points: np.ndarray  # (n, 2)
    labels: List[dict]  # per-point {"id", "language", "role"}
    explained_variance_ratio: Tuple[float, float]


@dataclass
class HeatmapGrid:
    grid: np.ndarray  # rows x cols of cosines
    token_max: float
    token_argmax: Tuple[int, int]


def _top2_components(xc: np.ndarray, seed: int = 42) -> Tuple[np.ndarray, np.ndarray]:
    """Top-2 principal directions and their variances of centered data xc."""
    n, d = xc.shape
    if d <= 512:
        cov = (xc.T @ xc) / (n - 1)
        vals, vecs = np.linalg.eigh(cov)
        order = np.argsort(vals)[::-1][:2]
        comps = vecs[:, order].T
        variances = vals[order]
    else:
        # seeded randomized block power iteration on the implicit covariance
        rng = np.random.default_rng(seed)
        block = rng.standard_normal((d, 2))
        block, _ = np.linalg.qr(block)
        for _ in range(100):
            block = xc.T @ (xc @ block) / (n - 1)
            block, _ = np.linalg.qr(block)
        comps = block.T
        variances = np.array(
            [float(c @ (xc.T @ (xc @ c)) / (n - 1)) for c in comps]
        )
        if variances[0] < variances[1]:
            comps = comps[::-1]
            variances = variances[::-1]
    # sign convention: first nonzero loading of each component is positive
    fixed = []
    for c in comps:
        nz = np.nonzero(np.abs(c) > 1e-12)[0]
        if nz.size and c[nz[0]] < 0:
            c = -c
        fixed.append(c)
    return np.stack(fixed), variances


def pca_project(embeddings: np.ndarray, labels: Optional[Sequence[dict]] = None,
                seed: int = 42) -> Projection2D:
    """Project (n, d) embeddings onto their top-2 principal directions."""
    x = np.asarray(embeddings, dtype=np.float64)
    n, d = x.shape
    if n < 3 or d < 2:
        raise DegenerateData(f"need n >= 3 and d >= 2, got {x.shape}")
    mean = x.mean(axis=0)
    xc = x - mean
    total_var = float(np.sum(np.var(xc, axis=0, ddof=1)))
    if total_var <= 0.0:
        raise DegenerateData("all points identical")
    comps, variances = _top2_components(xc, seed=seed)
    points = xc @ comps.T
    ratios = (float(variances[0] / total_var), float(variances[1] / total_var))
    labels = list(labels) if labels is not None else [{} for _ in range(n)]
    return Projection2D(points=points, labels=labels, explained_variance_ratio=ratios)


def maxsim_heatmap(q: MultiVectorEmbedding, d: MultiVectorEmbedding,
                   grid: Tuple[int, int]) -> List[HeatmapGrid]:
    """One rows x cols cosine grid per query token over the doc tokens."""
    rows, cols = grid
    if rows * cols != d.n_tokens:
        raise GridMismatch(f"grid {rows}x{cols} does not cover {d.n_tokens} doc tokens")
    from .scoring import _cosine_matrix

    m = _cosine_matrix(q, d)  # n_q x n_d
    out = []
    for t in range(q.n_tokens):
        g = m[t].reshape(rows, cols)
        flat_arg = int(np.argmax(m[t]))
        out.append(
            HeatmapGrid(
                grid=g,
                token_max=float(m[t].max()),
                token_argmax=(flat_arg // cols, flat_arg % cols),
            )
        )
    return out


def storage_report(index, truncate_dims: Optional[Sequence[int]] = None) -> dict:
    """Bytes-per-document accounting for a dense or multi-vector index.

    For a dense index, optional truncation dims report the cost at each
    retained prefix length; ratios are relative to the full dimension.
    """
    if isinstance(index, DenseIndex):
        full = index.dim * 4
        report = {
            "kind": "dense",
            "n_docs": index.n_docs,
            "dim": index.dim,
            "bytes_per_doc": full,
            "total_bytes": full * index.n_docs,
        }
        if truncate_dims:
            report["truncations"] = {
                int(d): {
                    "bytes_per_doc": int(d) * 4,
                    "ratio_vs_full": (int(d) * 4) / full,
                }
                for d in truncate_dims
            }
        return report
    if isinstance(index, MultiVectorIndex):
        per_doc = [doc.n_tokens * doc.dim * 4 for doc in index.docs]
        return {
            "kind": "multivector",
            "n_docs": index.n_docs,
            "dim": index.dim,
            "bytes_per_doc_mean": float(np.mean(per_doc)),
            "bytes_per_doc": per_doc,
            "total_bytes": int(np.sum(per_doc)),
        }
    raise TypeError(f"unsupported index type {type(index).__name__}")


# -- file exports ----------------------------------------------------------


def export_projection_csv(path, projection: Projection2D, checkpoint: str = "") -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "language", "role", "checkpoint"])
        for (x, y), label in zip(projection.points, projection.labels):
            writer.writerow(
                [f"{x:.9f}", f"{y:.9f}", label.get("language", ""), label.get("role", ""), checkpoint]
            )


def export_variance_json(path, projections: Dict[str, Projection2D]) -> None:
    payload = {
        name: list(proj.explained_variance_ratio) for name, proj in sorted(projections.items())
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def export_heatmap_csv(dirpath, grids: List[HeatmapGrid], total_maxsim: float) -> None:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    summary = {"total_maxsim": total_maxsim, "tokens": []}
    for t, hg in enumerate(grids):
        with (d / f"token_{t:03d}.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "value"])
            for r in range(hg.grid.shape[0]):
                for c in range(hg.grid.shape[1]):
                    writer.writerow([r, c, f"{hg.grid[r, c]:.9f}"])
        summary["tokens"].append(
            {"token": t, "token_max": hg.token_max, "argmax": list(hg.token_argmax)}
        )
    (d / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
