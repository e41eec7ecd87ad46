"""Evaluation metrics: separation rate, curvature and normal differences, retrieval.

All metrics expect sets normalized to a unit bounding-box diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ContractError
from .losses import shape_loss
from .spatial import knn_many, nearest_many

SEPARATION_THRESHOLD = 0.02


class PreconditionError(ValueError):
    pass


class UnsupportedMetricError(ValueError):
    pass


@dataclass
class MetricsReport:
    separation_rate: float
    mean_curvature_diff: float
    mean_normal_diff: float | None
    per_example: list[dict] = field(default_factory=list)

    def as_record(self) -> str:
        nd = "nan" if self.mean_normal_diff is None else f"{self.mean_normal_diff:.9g}"
        return f"separation_rate={self.separation_rate:.9g} curvature_diff={self.mean_curvature_diff:.9g} normal_diff={nd}"


def _check_normalized(pred: np.ndarray, truth: np.ndarray, tol: float = 1e-6, pred_slack: float = 2.0) -> None:
    # predictions may overshoot the unit box a little; an unnormalized set is far off
    for name, s, limit in (("truth", truth, 1.0 + tol), ("pred", pred, pred_slack)):
        diag = float(np.linalg.norm(s.max(axis=0) - s.min(axis=0)))
        if diag > limit:
            raise PreconditionError(f"{name} bounding-box diagonal {diag:.6g} exceeds {limit:g}; normalize first")


def separation_rate(pred, truth, threshold: float = SEPARATION_THRESHOLD, check: bool = True) -> float:
    """Fraction of points of both sets whose closest opposite-set point is farther than ``threshold``."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if check:
        _check_normalized(pred, truth)
    _, d_p = nearest_many(pred, truth)
    _, d_t = nearest_many(truth, pred)
    return float(((d_p > threshold).sum() + (d_t > threshold).sum()) / (len(pred) + len(truth)))


def patch_size(n: int, patch_fraction: float) -> int:
    return max(3, int(round(patch_fraction * n)))


def _patch_eigen(ps: np.ndarray, patch_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Ascending covariance eigenvalues and eigenvectors of every point's patch."""
    k = min(patch_size(len(ps), patch_fraction), len(ps))
    idx, _ = knn_many(ps, ps, k)
    patches = ps[idx]
    centered = patches - patches.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    return np.linalg.eigh(cov)


def curvature_indicators(ps, patch_fraction: float = 0.003) -> tuple[np.ndarray, np.ndarray]:
    """Smallest eigenvalue over the eigenvalue sum for every point, with a degeneracy flag.

    Patches whose points all coincide get indicator 0 and the flag set.
    """
    ps = np.asarray(ps, dtype=np.float64)
    vals, _ = _patch_eigen(ps, patch_fraction)
    vals = np.clip(vals, 0.0, None)
    total = vals.sum(axis=1)
    degenerate = total <= 1e-300
    ind = np.where(degenerate, 0.0, vals[:, 0] / np.where(degenerate, 1.0, total))
    return ind, degenerate


def curvature_indicator(p, ps, patch_fraction: float = 0.003) -> float:
    """Indicator of the patch around ``p`` (the patch includes ``p`` itself when it belongs to ``ps``)."""
    ps = np.asarray(ps, dtype=np.float64)
    k = min(patch_size(len(ps), patch_fraction), len(ps))
    idx, _ = knn_many(np.asarray(p, dtype=np.float64)[None, :], ps, k)
    patch = ps[idx[0]]
    c = patch - patch.mean(axis=0)
    vals = np.clip(np.linalg.eigvalsh(c.T @ c / k), 0.0, None)
    return 0.0 if vals.sum() <= 1e-300 else float(vals[0] / vals.sum())


def curvature_difference(pred, truth, patch_fraction: float = 0.003, check: bool = True) -> float:
    """Mean over all points of both sets of |indicator(p) - indicator(closest opposite point)|."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if check:
        _check_normalized(pred, truth)
    cp, _ = curvature_indicators(pred, patch_fraction)
    ct, _ = curvature_indicators(truth, patch_fraction)
    ip, _ = nearest_many(pred, truth)
    it, _ = nearest_many(truth, pred)
    diffs = np.concatenate([np.abs(cp - ct[ip]), np.abs(ct - cp[it])])
    return float(diffs.mean())


def pca_normals(ps, patch_fraction: float = 0.003) -> np.ndarray:
    ps = np.asarray(ps, dtype=np.float64)
    _, vecs = _patch_eigen(ps, patch_fraction)
    return vecs[:, :, 0]


def normal_difference(pred, truth, patch_fraction: float = 0.003, check: bool = True) -> float:
    """Mean unoriented angle (radians, in [0, pi/2]) between PCA normals of matched closest points."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape[1] != 3 or truth.shape[1] != 3:
        raise UnsupportedMetricError("normal difference is defined for 3-D point sets only")
    if check:
        _check_normalized(pred, truth)
    npred = pca_normals(pred, patch_fraction)
    ntruth = pca_normals(truth, patch_fraction)
    ip, _ = nearest_many(pred, truth)
    it, _ = nearest_many(truth, pred)
    # atan2 of |cross| and |dot| stays exact for parallel normals, arccos does not
    a = np.concatenate([npred, ntruth])
    b = np.concatenate([ntruth[ip], npred[it]])
    cross = np.linalg.norm(np.cross(a, b), axis=1)
    dots = np.abs((a * b).sum(axis=1))
    return float(np.arctan2(cross, dots).mean())


def retrieve_distance(p, q) -> float:
    return float(shape_loss(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)).data)


def retrieve_closest(query, corpus) -> tuple[int, float]:
    """Corpus entry with the smallest symmetric closest-point distance to ``query`` (first on ties)."""
    if len(corpus) == 0:
        raise ContractError("retrieval corpus is empty")
    best, best_d = 0, math.inf
    for i, c in enumerate(corpus):
        d = retrieve_distance(query, c)
        if d < best_d:
            best, best_d = i, d
    return best, best_d


def evaluate(preds, truths, patch_fraction: float = 0.003, target_label: str | None = None) -> MetricsReport:
    """Average the three metrics over example pairs.

    Normal difference is reported as not applicable for 2-D sets and for
    skeleton targets.
    """
    rows = []
    with_normals = target_label != "skeleton"
    for pred, truth in zip(preds, truths):
        pred = np.asarray(pred, dtype=np.float64)
        truth = np.asarray(truth, dtype=np.float64)
        row = {
            "separation_rate": separation_rate(pred, truth),
            "curvature_diff": curvature_difference(pred, truth, patch_fraction),
            "normal_diff": None,
        }
        if with_normals and pred.shape[1] == 3:
            row["normal_diff"] = normal_difference(pred, truth, patch_fraction)
        rows.append(row)
    if not rows:
        raise ContractError("evaluate needs at least one example")
    normals = [r["normal_diff"] for r in rows if r["normal_diff"] is not None]
    return MetricsReport(
        separation_rate=float(np.mean([r["separation_rate"] for r in rows])),
        mean_curvature_diff=float(np.mean([r["curvature_diff"] for r in rows])),
        mean_normal_diff=float(np.mean(normals)) if len(normals) == len(rows) else None,
        per_example=rows,
    )


def format_table(reports: dict[str, MetricsReport]) -> str:
    """Aligned text table: one row per setting, the three metric columns."""
    header = f"{'setting':<10} {'separation rate':>16} {'curvature diff.':>16} {'normal diff.':>14}"
    lines = [header, "-" * len(header)]
    for name, r in reports.items():
        nd = "-" if r.mean_normal_diff is None else f"{r.mean_normal_diff:.3f}"
        lines.append(f"{name:<10} {100 * r.separation_rate:>15.1f}% {r.mean_curvature_diff:>16.3f} {nd:>14}")
    return "\n".join(lines)
