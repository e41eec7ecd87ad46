"""Standalone SVG scatter plots with an optional displacement-line overlay."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np

DEFAULT_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class Style:
    color: str = "#1f77b4"
    radius: float = 1.5
    label: str = ""


def project(pts: np.ndarray, drop_axis: int = 2) -> np.ndarray:
    """Orthographic projection of 3-D points by dropping one coordinate; 2-D points pass through."""
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError(f"expected (n, 2) or (n, 3) points, got {pts.shape}")
    if pts.shape[1] == 2:
        return pts
    return np.delete(pts, drop_axis, axis=1)


def overlay_indices(n: int, fraction: float, seed: int = 0) -> np.ndarray:
    """``floor(fraction * n)`` distinct indices, sorted."""
    if not 0 <= fraction <= 1:
        raise ValueError(f"overlay fraction must lie in [0, 1], got {fraction}")
    m = int(np.floor(fraction * n))
    return np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))


def svg_scatter(
    sets: list[tuple[np.ndarray, Style]],
    path=None,
    overlay: tuple[np.ndarray, np.ndarray] | None = None,
    overlay_fraction: float = 0.2,
    seed: int = 0,
    drop_axis: int = 2,
    size: int = 480,
    margin: int = 12,
) -> str:
    """Render point sets (and source->target lines) to SVG; returns the text and writes it if ``path`` is given."""
    projected = [(project(p, drop_axis), s) for p, s in sets]
    lines = None
    if overlay is not None:
        src, dst = project(overlay[0], drop_axis), project(overlay[1], drop_axis)
        if src.shape != dst.shape:
            raise ValueError(f"overlay endpoints differ in shape: {src.shape} vs {dst.shape}")
        keep = overlay_indices(len(src), overlay_fraction, seed)
        lines = (src[keep], dst[keep])
    everything = [p for p, _ in projected] + (list(lines) if lines is not None else [])
    allpts = np.concatenate(everything) if everything else np.zeros((1, 2))
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    k = (size - 2 * margin) / span

    def xy(p):
        # flip y so +y points up
        return margin + (p[:, 0] - lo[0]) * k, size - margin - (p[:, 1] - lo[1]) * k

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i, (p, s) in enumerate(projected):
        label = f" data-label={quoteattr(s.label)}" if s.label else ""
        out.append(f'<g class="points" id="set{i}" fill={quoteattr(s.color)}{label}>')
        xs, ys = xy(p)
        out += [f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{s.radius:g}"/>' for x, y in zip(xs, ys)]
        out.append("</g>")
    if lines is not None:
        out.append('<g class="overlay" stroke="black" stroke-width="0.5">')
        (x0, y0), (x1, y1) = xy(lines[0]), xy(lines[1])
        out += [f'<line x1="{a:.3f}" y1="{b:.3f}" x2="{c:.3f}" y2="{d:.3f}"/>' for a, b, c, d in zip(x0, y0, x1, y1)]
        out.append("</g>")
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write SVG to {path}: {exc}") from exc
    return text
