"""Adam, the step learning-rate schedule, the joint bidirectional training loop and multi-pass inference."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import ContractError, NumericError, Tensor
from .datasynth import PairedDataset
from .layers import NetworkConfig, branch_forward, init_params
from .losses import LossBreakdown, LossWeights, combined_loss

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr_init: float = 1e-3
    lr_floor: float = 1e-4
    decay_points: tuple[float, ...] = (0.25, 0.5, 0.75)
    terminal_floor: bool = True
    batch_size: int = 8
    weights: LossWeights = LossWeights()
    noise: bool = True
    crossreg: bool = True
    seed: int = 0
    random_fps: bool = True

    def __post_init__(self):
        if self.lr_floor > self.lr_init:
            raise ContractError("lr_floor must not exceed lr_init")
        pts = list(self.decay_points)
        if any(not 0 < p < 1 for p in pts) or any(b <= a for a, b in zip(pts, pts[1:])):
            raise ContractError(f"decay_points must be strictly increasing in (0, 1): {pts}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractError("epochs and batch_size must be >= 1")

    @property
    def ablation_tag(self) -> str:
        return f"ns{'+' if self.noise else '-'}rg{'+' if self.crossreg else '-'}"


def parse_ablation(tag: str) -> dict[str, bool]:
    """``"ns+rg-"`` -> ``{"noise": True, "crossreg": False}``."""
    tag = tag.strip().lower()
    if len(tag) != 6 or tag[:2] != "ns" or tag[3:5] != "rg" or tag[2] not in "+-" or tag[5] not in "+-":
        raise ContractError(f"ablation tag must look like ns+rg-, got {tag!r}")
    return {"noise": tag[2] == "+", "crossreg": tag[5] == "+"}


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState, lr: float) -> AdamState:
    """One bias-corrected Adam update, in place on ``params``.

    All gradients are checked before any parameter moves.
    """
    if lr <= 0:
        raise ContractError("learning rate must be positive")
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ContractError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in layer {name}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - b1) * g if m is None else b1 * m + (1 - b1) * g
        v = (1 - b2) * g * g if v is None else b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Halve at every decay point passed, never below the floor; after the last point jump to the floor."""
    passed = sum(1 for p in cfg.decay_points if epoch >= p * cfg.epochs)
    if cfg.terminal_floor and cfg.decay_points and passed == len(cfg.decay_points):
        return cfg.lr_floor
    return max(cfg.lr_init * 0.5**passed, cfg.lr_floor)


@dataclass
class Checkpoint:
    cfg_xy: NetworkConfig
    cfg_yx: NetworkConfig
    params_xy: dict[str, np.ndarray]
    params_yx: dict[str, np.ndarray]
    seed: int = 0
    epoch: int = 0
    adam: AdamState | None = None
    history: list[tuple[int, float, LossBreakdown]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.cfg_xy.dim

    def branch(self, direction: str) -> tuple[NetworkConfig, dict[str, Tensor]]:
        if direction == "xy":
            cfg, raw = self.cfg_xy, self.params_xy
        elif direction == "yx":
            cfg, raw = self.cfg_yx, self.params_yx
        else:
            raise ContractError(f"direction must be 'xy' or 'yx', got {direction!r}")
        return cfg, {k: Tensor(v) for k, v in raw.items()}


def progress_line(epoch: int, lr: float, b: LossBreakdown) -> str:
    return f"epoch={epoch} lr={lr:.9g} {b.as_record()}"


def _mean_breakdown(parts: list[LossBreakdown]) -> LossBreakdown:
    fields = ("shape_xy", "density_xy", "shape_yx", "density_yx", "cross_reg", "total")
    return LossBreakdown(*[float(np.mean([getattr(p, f) for p in parts])) for f in fields])


def _groups(indices: list[int], dataset: PairedDataset) -> list[list[int]]:
    # pairs with equal cardinalities share one batched forward pass
    groups: dict[tuple[int, int], list[int]] = {}
    for i in indices:
        x, y = dataset.pairs[i]
        groups.setdefault((len(x), len(y)), []).append(i)
    return list(groups.values())


def batch_loss(
    dataset: PairedDataset,
    batch: list[int],
    cfg_xy: NetworkConfig,
    cfg_yx: NetworkConfig,
    params_xy: dict[str, Tensor],
    params_yx: dict[str, Tensor],
    cfg: TrainConfig,
    rng: np.random.Generator | None,
    fps_seed="random",
) -> tuple[Tensor, list[LossBreakdown]]:
    """Mean combined loss over ``batch`` (tape recorded on the active graph)."""
    total = None
    parts = []
    for group in _groups(batch, dataset):
        xs = np.stack([dataset.pairs[i][0] for i in group])
        ys = np.stack([dataset.pairs[i][1] for i in group])
        ix = branch_forward(xs, cfg_xy, params_xy, rng, fps_seed)
        iy = branch_forward(ys, cfg_yx, params_yx, rng, fps_seed)
        for j in range(len(group)):
            loss, br = combined_loss(xs[j], ys[j], ix[j], iy[j], cfg.weights, use_reg=cfg.crossreg)
            total = loss if total is None else ad.add(total, loss)
            parts.append(br)
    return ad.scale(total, 1.0 / len(batch)), parts


def train(
    dataset: PairedDataset,
    net_cfg: NetworkConfig | tuple[NetworkConfig, NetworkConfig],
    cfg: TrainConfig,
    sink: Callable[[str], None] | None = None,
) -> Checkpoint:
    """Train both directional branches jointly on ``dataset``.

    ``sink`` receives one ``epoch=... total=...`` line per epoch.
    """
    if len(dataset) == 0:
        raise ContractError("training needs a non-empty dataset")
    cfg_xy, cfg_yx = (net_cfg, net_cfg) if isinstance(net_cfg, NetworkConfig) else net_cfg
    if cfg_xy.dim != cfg_yx.dim or cfg_xy.dim != dataset.dim:
        raise ContractError("both branches and the dataset must share one dim")
    if not cfg.noise:
        cfg_xy, cfg_yx = cfg_xy.without_noise(), cfg_yx.without_noise()
    init_rng = np.random.default_rng([cfg.seed, 0])
    params_xy = init_params(cfg_xy, init_rng)
    params_yx = init_params(cfg_yx, init_rng)
    all_params = {f"xy/{k}": v for k, v in params_xy.items()} | {f"yx/{k}": v for k, v in params_yx.items()}
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    noise_rng = np.random.default_rng([cfg.seed, 2])
    state = AdamState()
    history = []
    fps_seed = "random" if cfg.random_fps else 0
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        order = shuffle_rng.permutation(len(dataset)).tolist()
        parts: list[LossBreakdown] = []
        for bi, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            with ad.Graph() as g:
                loss, br = batch_loss(dataset, batch, cfg_xy, cfg_yx, params_xy, params_yx, cfg, noise_rng, fps_seed)
                if not np.isfinite(loss.data):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
                for p in all_params.values():
                    p.zero_grad()
                g.backward(loss)
            grads = {k: p.grad for k, p in all_params.items() if p.grad is not None}
            try:
                adam_step(all_params, grads, state, lr)
            except NumericError as exc:
                raise TrainingError(f"epoch {epoch}, batch {bi}: {exc}") from exc
            parts.extend(br)
        mean = _mean_breakdown(parts)
        history.append((epoch, lr, mean))
        line = progress_line(epoch, lr, mean)
        log.debug(line)
        if sink is not None:
            sink(line)
    return Checkpoint(
        cfg_xy,
        cfg_yx,
        {k: v.data.copy() for k, v in params_xy.items()},
        {k: v.data.copy() for k, v in params_yx.items()},
        seed=cfg.seed,
        epoch=cfg.epochs,
        adam=state,
        history=history,
    )


def predict(x, cfg: NetworkConfig, params: dict[str, Tensor], rng: np.random.Generator | None, fps_seed=0) -> np.ndarray:
    """``x + displacements`` for one set or a batch."""
    x = np.asarray(x, dtype=np.float64)
    return x + branch_forward(x, cfg, params, rng, fps_seed).data


def infer_multipass(x, cfg: NetworkConfig, params: dict[str, Tensor], passes: int, rng: np.random.Generator | None) -> np.ndarray:
    """Union of ``passes`` forward applications with fresh noise each; ``passes * |x|`` points."""
    if passes < 1:
        raise ContractError("passes must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    stacked = np.broadcast_to(x, (passes,) + x.shape)
    out = predict(stacked, cfg, params, rng)
    return out.reshape(-1, x.shape[1])


def with_overrides(cfg: TrainConfig, **kw) -> TrainConfig:
    return replace(cfg, **kw)
