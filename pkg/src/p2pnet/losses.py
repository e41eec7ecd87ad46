"""Correspondence-free training losses.

Neighbor selection is done on plain arrays (exact, lowest index on ties);
only the distances of the selected pairs go through the tape. Targets are
constants, predictions and displacements carry gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ContractError, DimensionError, Tensor
from .spatial import knn_many, pairwise_distances, smallest_k


@dataclass(frozen=True)
class LossWeights:
    lambda_density: float = 1.0
    mu_reg: float = 0.1
    k_density: int = 8

    def __post_init__(self):
        if self.lambda_density < 0 or self.mu_reg < 0 or self.k_density < 1:
            raise ContractError(f"invalid loss weights {self}")


@dataclass
class LossBreakdown:
    shape_xy: float
    density_xy: float
    shape_yx: float
    density_yx: float
    cross_reg: float
    total: float

    def as_record(self) -> str:
        return (
            f"shape_xy={self.shape_xy:.9g} density_xy={self.density_xy:.9g} "
            f"shape_yx={self.shape_yx:.9g} density_yx={self.density_yx:.9g} "
            f"reg={self.cross_reg:.9g} total={self.total:.9g}"
        )


def _arr(p) -> np.ndarray:
    return p.data if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim != 2 or b.ndim != 2 or len(a) == 0 or len(b) == 0:
        raise ContractError(f"point sets must be non-empty (n, dim) arrays, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"point set dims differ: {a.shape[1]} vs {b.shape[1]}")


def chamfer(a, b, dist: np.ndarray | None = None) -> Tensor:
    """Sum over ``b`` of the distance to the closest point of ``a``, plus the converse.

    Either argument may be a tensor; gradients flow into whichever are.
    ``dist`` optionally supplies the (|a|, |b|) distance matrix.
    """
    a_arr, b_arr = _arr(a), _arr(b)
    _check_pair(a_arr, b_arr)
    if dist is None:
        dist = pairwise_distances(a_arr, b_arr)
    ia = np.argmin(dist, axis=0)  # closest a point for every b point
    ib = np.argmin(dist, axis=1)
    a_t, b_t = ad.as_tensor(a), ad.as_tensor(b)
    t1 = ad.row_norm(ad.sub(ad.gather_points(a_t, ia), b_t))
    t2 = ad.row_norm(ad.sub(a_t, ad.gather_points(b_t, ib)))
    return ad.add(ad.sum_all(t1), ad.sum_all(t2))


def shape_loss(pred, target) -> Tensor:
    """Symmetric sum of closest-point L2 distances between prediction and target."""
    return chamfer(pred, target)


def density_vector(p, ps, k: int, exclude_coincident: bool = True) -> np.ndarray:
    """Ascending distances from ``p`` to its ``k`` nearest points of ``ps``."""
    idx, d = knn_many(np.asarray(p, dtype=np.float64)[None, :], _arr(ps), k, exclude_coincident)
    return d[0]


def density_k_eff(pred, target, k: int, d_tp: np.ndarray | None = None, d_tt: np.ndarray | None = None) -> int:
    """Shared neighbor count: ``k`` clamped by the fewest non-coincident candidates in either set."""
    t, p = _arr(target), _arr(pred)
    d_tp = pairwise_distances(t, p) if d_tp is None else d_tp
    d_tt = pairwise_distances(t, t) if d_tt is None else d_tt
    avail_p = int((d_tp != 0.0).sum(axis=1).min())
    avail_t = int((d_tt != 0.0).sum(axis=1).min())
    return min(k, len(t) - 1, avail_t, avail_p)


def _knn_from(d: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    d = np.where(d == 0.0, np.inf, d)
    idx = smallest_k(d, k)
    return idx, np.take_along_axis(d, idx, axis=1)


def density_loss(pred, target, k: int = 8, d_tp: np.ndarray | None = None, d_tt: np.ndarray | None = None) -> Tensor:
    """Mean-over-k absolute gap between target and prediction density vectors, summed over target points.

    Same-set neighbors skip the query point itself and prediction neighbors
    skip exact coincidences, so a prediction equal to the target scores 0.
    """
    t_arr, p_arr = _arr(target), _arr(pred)
    _check_pair(p_arr, t_arr)
    d_tp = pairwise_distances(t_arr, p_arr) if d_tp is None else d_tp
    d_tt = pairwise_distances(t_arr, t_arr) if d_tt is None else d_tt
    k_eff = density_k_eff(p_arr, t_arr, k, d_tp, d_tt)
    if k_eff < 1:
        raise ContractError("density loss needs at least one neighbor candidate per target point")
    _, dt = _knn_from(d_tt, k_eff)
    ip, _ = _knn_from(d_tp, k_eff)
    near = ad.gather_points(ad.as_tensor(pred), ip)
    dp = ad.row_norm(ad.sub(near, Tensor(np.broadcast_to(t_arr[:, None, :], near.shape))))
    gap = ad.absolute(ad.sub(Tensor(dt), dp))
    return ad.scale(ad.sum_all(gap), 1.0 / k_eff)


def lift(points, disp, reverse: bool = False) -> Tensor:
    """``[p, p + d]`` per point, or ``[p + d, p]`` with ``reverse``."""
    pts = _arr(points)
    moved = ad.add(Tensor(pts), disp)
    return ad.concat(moved, Tensor(pts)) if reverse else ad.concat(Tensor(pts), moved)


def cross_reg_loss(x, ix, y, iy) -> Tensor:
    """Chamfer distance in 2*dim space between ``[x, x + ix]`` and ``[y + iy, y]``."""
    x_arr, y_arr = _arr(x), _arr(y)
    if ix.shape != x_arr.shape or iy.shape != y_arr.shape:
        raise ContractError(
            f"displacement/point cardinality mismatch: {ix.shape} vs {x_arr.shape}, {iy.shape} vs {y_arr.shape}"
        )
    if x_arr.shape[1] != y_arr.shape[1]:
        raise DimensionError("x and y dims differ")
    return chamfer(lift(x_arr, ad.as_tensor(ix)), lift(y_arr, ad.as_tensor(iy), reverse=True))


def combined_loss(x, y, ix, iy, w: LossWeights = LossWeights(), use_reg: bool = True) -> tuple[Tensor, LossBreakdown]:
    """Both directional geometric losses plus the weighted cross term.

    With ``use_reg=False`` the cross term is still evaluated and reported but
    left out of the total.
    """
    x_arr, y_arr = _arr(x), _arr(y)
    ix, iy = ad.as_tensor(ix), ad.as_tensor(iy)
    y_hat = ad.add(Tensor(x_arr), ix)
    x_hat = ad.add(Tensor(y_arr), iy)
    # one pred-target matrix serves both shape and density terms (distances are symmetric bitwise)
    d_xy = pairwise_distances(y_hat.data, y_arr)
    d_yx = pairwise_distances(x_hat.data, x_arr)
    s_xy = chamfer(y_hat, y_arr, d_xy)
    dens_xy = density_loss(y_hat, y_arr, w.k_density, d_xy.T, pairwise_distances(y_arr, y_arr))
    s_yx = chamfer(x_hat, x_arr, d_yx)
    dens_yx = density_loss(x_hat, x_arr, w.k_density, d_yx.T, pairwise_distances(x_arr, x_arr))
    reg = cross_reg_loss(x_arr, ix, y_arr, iy)
    total = ad.add(s_xy, ad.scale(dens_xy, w.lambda_density))
    total = ad.add(total, ad.add(s_yx, ad.scale(dens_yx, w.lambda_density)))
    if use_reg:
        total = ad.add(total, ad.scale(reg, w.mu_reg))
    parts = [float(t.data) for t in (s_xy, dens_xy, s_yx, dens_yx, reg)]
    return total, LossBreakdown(*parts, total=float(total.data))
