"""Finite-difference suites for the losses and the full branch + loss composition.

Each suite draws small random instances and compares tape gradients with
central differences. Instances where a perturbation changes a discrete
choice (a nearest neighbor, a relu mask, a max-pool winner) are skipped and
counted, since the function is not differentiable across such a flip.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import FDReport, Tensor, finite_diff_report
from .layers import FC, FP, SA, NetworkConfig, branch_forward, init_params
from .losses import LossWeights, combined_loss, cross_reg_loss, density_loss, shape_loss

SUITES = ("shape", "density", "cross_reg", "composition")


@dataclass
class SuiteResult:
    name: str
    max_rel_err: float
    instances: int
    skipped: int

    def passed(self, tol: float = 1e-4, need: int = 20) -> bool:
        return self.instances >= need and self.max_rel_err < tol

    def as_record(self) -> str:
        return f"suite={self.name} instances={self.instances} skipped={self.skipped} max_rel_err={self.max_rel_err:.3e}"


def tiny_config(dim: int, n_points: int = 16, noise_len: int = 4) -> NetworkConfig:
    """A two-level branch small enough to finite-difference quickly."""
    return NetworkConfig(
        dim=dim,
        sa_layers=(SA(8, 0.4, [8, 8], cap=8), SA(1, 1.0, [8, 16], cap=8)),
        fp_layers=(FP([16]), FP([8, 8])),
        fc_head=(FC(8), FC(dim)),
        noise_len=noise_len,
        n_points=n_points,
    )


def _instance(rng: np.random.Generator, n: int) -> tuple[int, np.ndarray, np.ndarray]:
    dim = int(rng.choice([2, 3]))
    return dim, rng.uniform(-0.5, 0.5, (n, dim)), rng.uniform(-0.5, 0.5, (n, dim))


def _shape_case(rng, n):
    _, p, t = _instance(rng, n)
    return (lambda v: shape_loss(v, t)), p, None


def _density_case(rng, n):
    _, p, t = _instance(rng, n)
    return (lambda v: density_loss(v, t, k=8)), p, None


def _cross_case(rng, n):
    _, x, y = _instance(rng, n)
    ix = rng.normal(0, 0.2, x.shape)
    iy = rng.normal(0, 0.2, y.shape)
    if rng.random() < 0.5:
        return (lambda v: cross_reg_loss(x, v, y, iy)), ix, None
    return (lambda v: cross_reg_loss(x, ix, y, v)), iy, None


def _composition_case(rng, n, coords_per_instance: int = 24):
    dim, x, y = _instance(rng, n)
    cfg = tiny_config(dim, n)
    params_xy = init_params(cfg, rng)
    params_yx = init_params(cfg, rng)
    for p in list(params_xy.values()) + list(params_yx.values()):
        p.data = p.data + rng.normal(0, 0.05, p.shape)  # nonzero biases
    side, params = (("xy", params_xy), ("yx", params_yx))[int(rng.integers(2))]
    name = sorted(params)[int(rng.integers(len(params)))]
    noise_seed = int(rng.integers(2**31))

    def f(v: Tensor) -> Tensor:
        local = dict(params)
        local[name] = v
        pxy, pyx = (local, params_yx) if side == "xy" else (params_xy, local)
        noise = np.random.default_rng(noise_seed)
        ix = branch_forward(x, cfg, pxy, noise, fps_seed=0)
        iy = branch_forward(y, cfg, pyx, noise, fps_seed=0)
        return combined_loss(x, y, ix, iy, LossWeights())[0]

    w = params[name].data
    coords = rng.choice(w.size, size=min(coords_per_instance, w.size), replace=False)
    return f, w, coords


CASES: dict[str, Callable] = {
    "shape": _shape_case,
    "density": _density_case,
    "cross_reg": _cross_case,
    "composition": _composition_case,
}


def run_suite(name: str, instances: int = 20, n: int = 16, seed: int = 0, eps: float = 1e-5, max_tries: int = 200) -> SuiteResult:
    """Gather ``instances`` flip-free instances (or give up after ``max_tries``) and report the worst error."""
    rng = np.random.default_rng([seed, SUITES.index(name)])
    worst, used, skipped = 0.0, 0, 0
    while used < instances and used + skipped < max_tries:
        f, x, coords = CASES[name](rng, n)
        rep: FDReport = finite_diff_report(f, x, eps, coords)
        if rep.flipped:
            skipped += 1
            continue
        used += 1
        worst = max(worst, rep.max_rel_err)
    return SuiteResult(name, worst, used, skipped)


def run_all(instances: int = 20, n: int = 16, seed: int = 0, eps: float = 1e-5) -> list[SuiteResult]:
    return [run_suite(s, instances, n, seed, eps) for s in SUITES]
