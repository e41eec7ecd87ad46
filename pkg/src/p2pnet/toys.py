"""Scoring helpers for the 2-D toy studies (line -> disk, line -> bars, dog -> cat)."""

from __future__ import annotations

import numpy as np

from .datasynth import Normalization, rotation_2d


def to_canonical(pts: np.ndarray, norm: Normalization, info: dict) -> np.ndarray:
    """Undo normalization, rotation and scale of a generated 2-D pair."""
    world = norm.invert(pts)
    return world @ rotation_2d(info["angle"]) / info["scale"]


def overshoot_fraction(pred: np.ndarray, norm: Normalization, info: dict, aspect: float = 0.5, margin: float = 0.02) -> float:
    """Fraction of predicted points lying more than ``margin`` (normalized units) outside the target ellipse."""
    c = to_canonical(pred, norm, info)
    outside = (c[:, 0] ** 2 + (c[:, 1] / aspect) ** 2) > 1.0
    if not np.any(outside):
        return 0.0
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    boundary = np.stack([np.cos(th), aspect * np.sin(th)], axis=1)
    q = c[outside]
    d = np.sqrt(((q[:, None, :] - boundary[None]) ** 2).sum(-1)).min(axis=1)
    # canonical distances back to normalized units
    d_norm = d * info["scale"] / norm.scale
    return float((d_norm > margin).sum() / len(pred))


def middle_bar_fraction(pred: np.ndarray, norm: Normalization, info: dict, params: dict | None = None, band: float = 0.1) -> float:
    """Fraction of predicted points on the middle bar: within ``band`` (canonical units) of it horizontally and inside its height."""
    params = params or {}
    height = params.get("bar_height", 1.0)
    c = to_canonical(pred, norm, info)
    on = (np.abs(c[:, 0]) <= band) & (np.abs(c[:, 1]) <= height / 2 + band)
    return float(on.mean())
