"""Desk-scale reproductions of the 2-D toy studies.

Each study trains both branches on generated pairs, applies the X->Y branch
to held-out pairs drawn with a different seed and scores the predictions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .datasynth import GeneratorSpec, PairedDataset, generate
from .layers import desk_preset
from .metrics import curvature_difference, separation_rate
from .toys import middle_bar_fraction, overshoot_fraction
from .trainer import Checkpoint, TrainConfig, predict, train

TEST_SEED_OFFSET = 10_007


@dataclass
class StudyConfig:
    kind: str
    params: dict = field(default_factory=dict)
    n_train: int = 200
    n_test: int = 20
    points: int = 256
    epochs: int = 60
    seed: int = 0
    noise: bool = True
    crossreg: bool = True

    @property
    def tag(self) -> str:
        return f"ns{'+' if self.noise else '-'}rg{'+' if self.crossreg else '-'}"


@dataclass
class StudyResult:
    config: StudyConfig
    checkpoint: Checkpoint
    test: PairedDataset
    preds: list[np.ndarray]
    seconds: float
    scores: dict[str, float] = field(default_factory=dict)

    def record(self) -> str:
        body = " ".join(f"{k}={v:.6g}" for k, v in self.scores.items())
        return f"study={self.config.kind} setting={self.config.tag} seed={self.config.seed} {body} seconds={self.seconds:.1f}"


def run_study(cfg: StudyConfig, sink: Callable[[str], None] | None = None) -> StudyResult:
    train_set = generate(GeneratorSpec(cfg.kind, cfg.n_train, cfg.points, cfg.seed, dict(cfg.params)))
    test_set = generate(GeneratorSpec(cfg.kind, cfg.n_test, cfg.points, cfg.seed + TEST_SEED_OFFSET, dict(cfg.params)))
    tcfg = TrainConfig(epochs=cfg.epochs, noise=cfg.noise, crossreg=cfg.crossreg, seed=cfg.seed)
    t0 = time.perf_counter()
    ck = train(train_set, desk_preset(2, n_points=cfg.points), tcfg, sink)
    seconds = time.perf_counter() - t0
    net, params = ck.branch("xy")
    rng = np.random.default_rng([cfg.seed, 99])
    xs = np.stack([x for x, _ in test_set.pairs])
    preds = list(predict(xs, net, params, rng))
    return StudyResult(cfg, ck, test_set, preds, seconds)


def _mean(vals) -> float:
    return float(np.mean(list(vals)))


def line_disk_study(noise: bool, seed: int = 0, **kw) -> StudyResult:
    """Line -> elliptical disk without cross regularization; scores overshoot and separation."""
    res = run_study(StudyConfig("line_disk", noise=noise, crossreg=False, seed=seed, **kw))
    aspect = res.config.params.get("aspect", 0.5)
    res.scores = {
        "overshoot": _mean(overshoot_fraction(p, n, m, aspect) for p, n, m in zip(res.preds, res.test.norms, res.test.meta)),
        "separation_rate": _mean(separation_rate(p, y, check=False) for p, (_, y) in zip(res.preds, res.test.pairs)),
    }
    return res


def line_bars_study(protrusion: bool, seed: int = 0, **kw) -> StudyResult:
    """Line -> three bars; scores the share of output points on the middle bar."""
    params = {"protrusion": protrusion} | kw.pop("params", {})
    res = run_study(StudyConfig("line_bars", params=params, seed=seed, **kw))
    res.scores = {
        "middle_fraction": _mean(middle_bar_fraction(p, n, m, params) for p, n, m in zip(res.preds, res.test.norms, res.test.meta)),
        "separation_rate": _mean(separation_rate(p, y, check=False) for p, (_, y) in zip(res.preds, res.test.pairs)),
    }
    return res


def cat_dog_study(noise: bool, crossreg: bool, seed: int = 0, **kw) -> StudyResult:
    """Dog -> cat contours; scores curvature difference and separation."""
    res = run_study(StudyConfig("cat_dog", noise=noise, crossreg=crossreg, seed=seed, **kw))
    res.scores = {
        "curvature_diff": _mean(curvature_difference(p, y, check=False) for p, (_, y) in zip(res.preds, res.test.pairs)),
        "separation_rate": _mean(separation_rate(p, y, check=False) for p, (_, y) in zip(res.preds, res.test.pairs)),
    }
    return res
