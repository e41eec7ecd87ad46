"""Seeded generators for paired point-set datasets.

2-D toys: line -> elliptical disk, line -> three bars, dog -> cat contours.
3-D desk-scale analogues: analytic skeletons vs blue-noise surface samples
of capsules, ellipsoids and a box-with-legs composite, planar cross sections
of those surfaces, and orthographic single-view scans.

Every pair is normalized jointly so the bounding box of ``X u Y`` has unit
diagonal and is centered at the origin.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
from scipy.spatial.transform import Rotation

from .autodiff import ContractError


class GenerationError(RuntimeError):
    pass


class DegenerateShapeError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Normalization:
    """``normalized = (original - offset) / scale``."""

    scale: float
    offset: tuple[float, ...]

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts, dtype=np.float64) - np.asarray(self.offset)) / self.scale

    def invert(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64) * self.scale + np.asarray(self.offset)


@dataclass
class PairedDataset:
    pairs: list[tuple[np.ndarray, np.ndarray]]
    norms: list[Normalization]
    labels: tuple[str, str] = ("x", "y")
    meta: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def dim(self) -> int:
        return self.pairs[0][0].shape[1]

    def split(self, n_train: int) -> tuple["PairedDataset", "PairedDataset"]:
        def part(sl):
            return PairedDataset(self.pairs[sl], self.norms[sl], self.labels, self.meta[sl] if self.meta else [])

        return part(slice(0, n_train)), part(slice(n_train, None))


@dataclass
class GeneratorSpec:
    kind: str = "line_disk"
    count: int = 200
    points_per_set: int = 256
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.points_per_set < 16 or self.count < 1:
            raise ContractError(f"GeneratorSpec needs points_per_set >= 16 and count >= 1: {self}")

    def to_dict(self) -> dict:
        return asdict(self)


def bbox_diagonal(pts: np.ndarray) -> float:
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


def normalize_pair(x, y) -> tuple[np.ndarray, np.ndarray, Normalization]:
    """Translate and scale both sets so their joint bounding box is centered with diagonal 1."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    both = np.concatenate([x, y])
    lo, hi = both.min(axis=0), both.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    if not diag > 0:
        raise DegenerateShapeError("pair has a zero-diagonal bounding box")
    norm = Normalization(diag, tuple(float(v) for v in (lo + hi) / 2))
    return norm.apply(x), norm.apply(y), norm


def _pair_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, i])


def rotation_2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _random_similarity(rng, params) -> tuple[float, float]:
    lo, hi = params.get("scale_range", (0.5, 1.5))
    angle = rng.uniform(0, 2 * np.pi) if params.get("rotate", True) else 0.0
    return float(angle), float(rng.uniform(lo, hi))


def _emit(spec: GeneratorSpec, make_pair, labels) -> PairedDataset:
    pairs, norms, meta = [], [], []
    for i in range(spec.count):
        x, y, info = make_pair(_pair_rng(spec.seed, i))
        xn, yn, norm = normalize_pair(x, y)
        pairs.append((xn, yn))
        norms.append(norm)
        meta.append(info)
    return PairedDataset(pairs, norms, labels, meta)


# --- 2-D toys -------------------------------------------------------------------


def sample_segment(a, b, n: int, rng) -> np.ndarray:
    t = rng.uniform(0, 1, size=(n, 1))
    return np.asarray(a) + t * (np.asarray(b) - np.asarray(a))


def sample_ellipse_disk(a: float, b: float, n: int, rng) -> np.ndarray:
    """Area-uniform samples inside the ellipse with semi-axes ``a`` (x) and ``b`` (y)."""
    r = np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.stack([a * r * np.cos(th), b * r * np.sin(th)], axis=1)


def gen_line_disk(spec: GeneratorSpec) -> PairedDataset:
    """Segment along the major axis of an elliptical disk, under a random rotation and scale."""
    n = spec.points_per_set
    aspect = spec.params.get("aspect", 0.5)

    def make(rng):
        angle, s = _random_similarity(rng, spec.params)
        x = sample_segment((-1.0, 0.0), (1.0, 0.0), n, rng)
        y = sample_ellipse_disk(1.0, aspect, n, rng)
        rot = rotation_2d(angle) * s
        return x @ rot.T, y @ rot.T, {"angle": angle, "scale": s}

    return _emit(spec, make, ("line", "disk"))


def line_bars_canonical(n: int, rng, protrusion: bool, params: dict) -> tuple[np.ndarray, np.ndarray]:
    gap = params.get("bar_gap", 0.8)
    height = params.get("bar_height", 1.0)
    frac = params.get("protrusion_fraction", 0.1)
    radius = params.get("protrusion_radius", 0.08)
    n_bump = int(round(frac * n)) if protrusion else 0
    x = sample_segment((-1.0, 0.0), (1.0, 0.0), n - n_bump, rng)
    if n_bump:
        th = rng.uniform(np.pi, 2 * np.pi, n_bump)
        bump = np.stack([radius * np.cos(th), radius * np.sin(th)], axis=1)
        x = np.concatenate([x, bump])
    which = rng.integers(0, 3, n)
    bx = (which - 1) * gap
    by = rng.uniform(-height / 2, height / 2, n)
    return x, np.stack([bx, by], axis=1)


def gen_line_bars(spec: GeneratorSpec, protrusion: bool | None = None) -> PairedDataset:
    """Horizontal segment (optionally with a small bump under its middle) vs three vertical bars."""
    prot = spec.params.get("protrusion", False) if protrusion is None else protrusion

    def make(rng):
        angle, s = _random_similarity(rng, spec.params)
        x, y = line_bars_canonical(spec.points_per_set, rng, prot, spec.params)
        rot = rotation_2d(angle) * s
        return x @ rot.T, y @ rot.T, {"angle": angle, "scale": s, "protrusion": bool(prot)}

    return _emit(spec, make, ("line", "bars"))


def load_templates() -> dict[str, np.ndarray]:
    try:
        text = resources.files("p2pnet").joinpath("assets/cat_dog.json").read_text()
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise ConfigError(f"cat/dog template asset missing: {exc}") from exc
    return {k: np.asarray(v, dtype=np.float64) for k, v in json.loads(text).items()}


def sample_polyline(vertices: np.ndarray, n: int, phase: float = 0.0) -> np.ndarray:
    """``n`` points at equal arc-length spacing around a closed polyline, shifted by ``phase`` of a step."""
    closed = np.concatenate([vertices, vertices[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = (np.arange(n) + phase) * cum[-1] / n
    j = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    t = (s - cum[j]) / seg[j]
    return closed[j] + t[:, None] * (closed[j + 1] - closed[j])


def gen_cat_dog(spec: GeneratorSpec) -> PairedDataset:
    """Dog contour (X) and cat contour (Y) sharing one random rotation and scale per pair."""
    tpl = spec.params.get("templates") or load_templates()
    dog, cat = tpl["dog"], tpl["cat"]
    dog = dog - dog.mean(axis=0)
    cat = cat - cat.mean(axis=0)

    def make(rng):
        angle, s = _random_similarity(rng, spec.params)
        x = sample_polyline(dog, spec.points_per_set, rng.uniform())
        y = sample_polyline(cat, spec.points_per_set, rng.uniform())
        rot = rotation_2d(angle) * s
        return x @ rot.T, y @ rot.T, {"angle": angle, "scale": s}

    return _emit(spec, make, ("dog", "cat"))


# --- 3-D parametric shapes ---------------------------------------------------------


def _sphere_dirs(n: int, rng) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def capsule_surface(radius: float, half_len: float, n: int, rng) -> np.ndarray:
    """Area-uniform samples of a capsule whose axis runs along z from -half_len to half_len."""
    side = 2 * np.pi * radius * 2 * half_len
    caps = 4 * np.pi * radius**2
    on_side = rng.uniform(0, side + caps, n) < side
    out = np.empty((n, 3))
    k = int(on_side.sum())
    th = rng.uniform(0, 2 * np.pi, k)
    out[on_side] = np.stack([radius * np.cos(th), radius * np.sin(th), rng.uniform(-half_len, half_len, k)], axis=1)
    d = _sphere_dirs(n - k, rng)
    d[:, 2] += np.sign(d[:, 2]) * half_len / radius
    out[~on_side] = d * radius
    return out


def ellipsoid_surface(axes, n: int, rng) -> np.ndarray:
    """Area-uniform ellipsoid samples: sphere directions mapped and thinned by the area element."""
    a = np.asarray(axes, dtype=np.float64)
    elem_max = np.prod(a) / a.min()
    out, got = [], 0
    while got < n:
        u = _sphere_dirs(4 * n, rng)
        # area element of the map u -> a*u on the unit sphere
        elem = np.sqrt(((u / a) ** 2).sum(axis=1)) * np.prod(a)
        pts = u[rng.uniform(0, elem_max, len(u)) < elem] * a
        out.append(pts)
        got += len(pts)
    return np.concatenate(out)[:n]


def _box_surface(lo, hi, n: int, rng) -> np.ndarray:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    ext = hi - lo
    areas = np.array([ext[1] * ext[2], ext[0] * ext[2], ext[0] * ext[1]]).repeat(2)
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = lo + rng.uniform(0, 1, (n, 3)) * ext
    axis = face // 2
    side = face % 2
    pts[np.arange(n), axis] = np.where(side == 1, hi[axis], lo[axis])
    return pts


def box_legs_boxes(width: float, depth: float, height: float, top: float, leg: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Table-like composite: a slab on four square legs, all as (lo, hi) boxes."""
    boxes = [(np.array([-width / 2, -depth / 2, height - top]), np.array([width / 2, depth / 2, height]))]
    for sx in (-1, 1):
        for sy in (-1, 1):
            cx, cy = sx * (width / 2 - leg / 2), sy * (depth / 2 - leg / 2)
            boxes.append((np.array([cx - leg / 2, cy - leg / 2, 0.0]), np.array([cx + leg / 2, cy + leg / 2, height - top])))
    return boxes


def box_legs_surface(boxes, n: int, rng) -> np.ndarray:
    """Samples of the union's boundary: box faces minus the parts buried in another box."""
    areas = np.array([2 * ((h - l)[0] * (h - l)[1] + (h - l)[0] * (h - l)[2] + (h - l)[1] * (h - l)[2]) for l, h in boxes])
    out, got = [], 0
    while got < n:
        m = 2 * n
        which = rng.choice(len(boxes), size=m, p=areas / areas.sum())
        pts = np.empty((m, 3))
        for b, (lo, hi) in enumerate(boxes):
            sel = which == b
            pts[sel] = _box_surface(lo, hi, int(sel.sum()), rng)
        buried = np.zeros(m, dtype=bool)
        for b, (lo, hi) in enumerate(boxes):
            inside = np.all((pts > lo) & (pts < hi), axis=1) & (which != b)
            buried |= inside
        pts = pts[~buried]
        out.append(pts)
        got += len(pts)
    return np.concatenate(out)[:n]


def blue_noise(candidates: np.ndarray, n: int, min_dist: float, rng, retries: int = 6) -> tuple[np.ndarray, float]:
    """Dart throwing over ``candidates``: accept a candidate only if it keeps ``min_dist`` to all accepted ones.

    The radius shrinks by 10% per retry until ``n`` points fit; returns the
    points and the radius actually used.
    """
    r = min_dist
    for _ in range(retries + 1):
        order = rng.permutation(len(candidates))
        accepted: list[int] = []
        tree_pts = np.empty((n, candidates.shape[1]))
        cell = {}
        inv = 1.0 / r
        for i in order:
            p = candidates[i]
            key = tuple(np.floor(p * inv).astype(int))
            ok = True
            for off in np.ndindex(*(3,) * len(key)):
                nb = cell.get(tuple(k + o - 1 for k, o in zip(key, off)))
                if nb is not None:
                    for j in nb:
                        if np.sqrt(((tree_pts[j] - p) ** 2).sum()) < r:
                            ok = False
                            break
                if not ok:
                    break
            if not ok:
                continue
            tree_pts[len(accepted)] = p
            cell.setdefault(key, []).append(len(accepted))
            accepted.append(i)
            if len(accepted) == n:
                return candidates[np.array(accepted)], r
        r *= 0.9
    raise GenerationError(f"dart throwing placed only {len(accepted)} of {n} points (min_dist={min_dist}, retries={retries})")


def _blue_surface(sampler, area: float, n: int, rng, params) -> np.ndarray:
    oversample = params.get("oversample", 12)
    cand = sampler(oversample * n, rng)
    # a fraction of the hexagonal-packing radius leaves room for all n darts
    r0 = params.get("min_dist_factor", 0.6) * np.sqrt(area / n)
    pts, _ = blue_noise(cand, n, r0, rng, params.get("retries", 6))
    return pts


def ellipsoid_area(axes) -> float:
    a, b, c = axes
    p = 1.6075
    return 4 * np.pi * (((a * b) ** p + (a * c) ** p + (b * c) ** p) / 3) ** (1 / p)


def _skeleton_and_surface(family: str, n: int, rng, params) -> tuple[np.ndarray, np.ndarray, dict]:
    if family == "capsule":
        radius = rng.uniform(0.15, 0.3)
        half = rng.uniform(0.4, 0.8)
        area = 4 * np.pi * radius * half + 4 * np.pi * radius**2
        surf = _blue_surface(lambda m, g: capsule_surface(radius, half, m, g), area, n, rng, params)
        skel = np.zeros((n, 3))
        skel[:, 2] = rng.uniform(-half, half, n)
        return skel, surf, {"radius": radius, "half_len": half}
    if family == "ellipsoid":
        axes = np.sort(rng.uniform(0.3, 1.0, 3))[::-1]
        a, b, c = axes
        surf = _blue_surface(lambda m, g: ellipsoid_surface(axes, m, g), ellipsoid_area(axes), n, rng, params)
        # medial sheet of a tri-axial ellipsoid: filled ellipse in the a-b plane
        skel = np.zeros((n, 3))
        skel[:, :2] = sample_ellipse_disk((a * a - c * c) / a, (b * b - c * c) / b, n, rng)
        return skel, surf, {"axes": axes.tolist()}
    if family == "box_legs":
        w, d = rng.uniform(0.8, 1.4), rng.uniform(0.5, 0.9)
        h, top, leg = rng.uniform(0.5, 0.9), 0.08, 0.08
        boxes = box_legs_boxes(w, d, h, top, leg)
        area = sum(2 * ((hi - lo)[0] * (hi - lo)[1] + (hi - lo)[0] * (hi - lo)[2] + (hi - lo)[1] * (hi - lo)[2]) for lo, hi in boxes)
        surf = _blue_surface(lambda m, g: box_legs_surface(boxes, m, g), area, n, rng, params)
        n_top = n // 2
        tw, td = w / 2 - top / 2, d / 2 - top / 2
        sheet = np.stack([rng.uniform(-tw, tw, n_top), rng.uniform(-td, td, n_top), np.full(n_top, h - top / 2)], axis=1)
        legs = []
        per_leg = [(n - n_top) // 4 + (1 if i < (n - n_top) % 4 else 0) for i in range(4)]
        for (lo, hi), m in zip(boxes[1:], per_leg):
            c = (lo + hi) / 2
            legs.append(np.stack([np.full(m, c[0]), np.full(m, c[1]), rng.uniform(0, h - top / 2, m)], axis=1))
        return np.concatenate([sheet] + legs), surf, {"box": [w, d, h]}
    raise ConfigError(f"unknown shape family {family!r}")


def gen_parametric3d(spec: GeneratorSpec) -> PairedDataset:
    """Skeleton (X) vs blue-noise surface (Y) pairs for one shape family."""
    family = spec.params.get("family", "capsule")

    def make(rng):
        skel, surf, info = _skeleton_and_surface(family, spec.points_per_set, rng, spec.params)
        rot = Rotation.random(random_state=rng).as_matrix()
        s = rng.uniform(*spec.params.get("scale_range", (0.5, 1.5)))
        info.update({"family": family, "rotation": rot.tolist(), "scale": float(s)})
        return skel @ rot.T * s, surf @ rot.T * s, info

    return _emit(spec, make, ("skeleton", "surface"))


# --- cross sections ----------------------------------------------------------------


@dataclass(frozen=True)
class Plane:
    normal: tuple[float, float, float]
    offset: float

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal, dtype=np.float64)
        return pts @ (n / np.linalg.norm(n)) - self.offset


def parallel_planes(axis: int = 0, offsets=(-0.3, -0.1, 0.1, 0.3)) -> list[Plane]:
    n = [0.0, 0.0, 0.0]
    n[axis] = 1.0
    return [Plane(tuple(n), float(o)) for o in offsets]


def orthogonal_planes(offset: float = 0.0) -> list[Plane]:
    return [Plane((1.0, 0.0, 0.0), offset), Plane((0.0, 1.0, 0.0), offset), Plane((0.0, 0.0, 1.0), offset)]


def ellipsoid_plane_curve(axes, plane: Plane, m: int = 8192) -> np.ndarray | None:
    """Dense polyline of the intersection of an axis-aligned centered ellipsoid with ``plane``."""
    a = np.asarray(axes, dtype=np.float64)
    nrm = np.asarray(plane.normal, dtype=np.float64)
    nrm = nrm / np.linalg.norm(nrm)
    dn = a * nrm
    scale = np.linalg.norm(dn)
    mvec, o = dn / scale, plane.offset / scale
    if abs(o) >= 1:
        return None
    # circle on the unit sphere, mapped back by the axis scaling
    helper = np.eye(3)[np.argmin(np.abs(mvec))]
    e1 = np.cross(mvec, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(mvec, e1)
    rad = np.sqrt(1 - o * o)
    th = np.linspace(0, 2 * np.pi, m, endpoint=False)
    u = o * mvec + rad * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
    return u * a


def _resample_curves(curves: list[np.ndarray], n: int, rng) -> np.ndarray:
    lengths = np.array([np.linalg.norm(np.diff(np.concatenate([c, c[:1]]), axis=0), axis=1).sum() for c in curves])
    counts = np.floor(n * lengths / lengths.sum()).astype(int)
    for i in np.argsort(-(n * lengths / lengths.sum() - counts))[: n - counts.sum()]:
        counts[i] += 1
    return np.concatenate([sample_polyline(c, k, rng.uniform()) for c, k in zip(curves, counts) if k > 0])


def slice_cross_sections(surface_source, planes: list[Plane], n: int, rng, h: float = 0.01) -> np.ndarray:
    """Points on ``planes`` cut through a shape, resampled to ``n`` in total.

    ``surface_source`` is either ``("ellipsoid", axes)`` for an analytic cut
    or a dense (m, 3) point array, in which case points within ``h`` of a plane
    are kept (slab selection) and subsampled.
    """
    if not planes:
        raise ContractError("slice_cross_sections needs at least one plane")
    if isinstance(surface_source, tuple) and surface_source[0] == "ellipsoid":
        curves = [c for c in (ellipsoid_plane_curve(surface_source[1], p) for p in planes) if c is not None]
        if not curves:
            raise GenerationError("no plane intersects the shape")
        return _resample_curves(curves, n, rng)
    dense = np.asarray(surface_source, dtype=np.float64)
    near = np.zeros(len(dense), dtype=bool)
    for p in planes:
        near |= np.abs(p.signed_distance(dense)) <= h
    slab = dense[near]
    if len(slab) == 0:
        raise GenerationError("all planes miss the shape")
    return slab[rng.choice(len(slab), size=n, replace=len(slab) < n)]


def gen_cross_section(spec: GeneratorSpec) -> PairedDataset:
    """Cross sections (X) vs surface samples (Y).

    ``params["planes"]`` is ``"parallel"`` (four cuts, default) or
    ``"orthogonal"`` (three cuts); ``params["family"]`` is ``"ellipsoid"``
    (analytic) or ``"box_legs"`` (slab selection on a dense sampling).
    """
    family = spec.params.get("family", "ellipsoid")
    planes_kind = spec.params.get("planes", "parallel")
    n = spec.points_per_set

    def make(rng):
        _, surf, info = _skeleton_and_surface(family, n, rng, spec.params)
        if family == "ellipsoid":
            axes = np.asarray(info["axes"])
            source = ("ellipsoid", axes)
            extent = axes
        else:
            lo, hi = surf.min(axis=0), surf.max(axis=0)
            c = (lo + hi) / 2
            boxes = box_legs_boxes(*info["box"], 0.08, 0.08)
            source = box_legs_surface(boxes, 40 * n, rng) - c
            surf = surf - c
            extent = (hi - lo) / 2
        if planes_kind == "orthogonal":
            planes = orthogonal_planes()
        else:
            axis = int(spec.params.get("axis", 0))
            fr = np.array(spec.params.get("plane_fractions", (-0.6, -0.2, 0.2, 0.6)))
            planes = parallel_planes(axis, tuple(fr * extent[axis]))
        x = slice_cross_sections(source, planes, n, rng, spec.params.get("slab", 0.01))
        rot = Rotation.random(random_state=rng).as_matrix() if spec.params.get("rotate", False) else np.eye(3)
        info.update({"family": family, "planes": planes_kind})
        return x @ rot.T, surf @ rot.T, info

    return _emit(spec, make, ("cross_section", "surface"))


def simulate_single_view(surface, view_dir, cell: float) -> np.ndarray:
    """Orthographic hidden-point culling: per image cell keep the point closest to the viewer.

    The viewer looks along ``view_dir``, so smaller ``p . view_dir`` is nearer.
    """
    pts = np.asarray(surface, dtype=np.float64)
    if len(pts) == 0 or cell <= 0:
        raise ContractError("simulate_single_view needs a non-empty surface and cell > 0")
    v = np.asarray(view_dir, dtype=np.float64)
    v = v / np.linalg.norm(v)
    helper = np.eye(3)[np.argmin(np.abs(v))]
    e1 = np.cross(v, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v, e1)
    depth = pts @ v
    keys = np.floor(np.stack([pts @ e1, pts @ e2], axis=1) / cell).astype(np.int64)
    order = np.lexsort((np.arange(len(pts)), depth, keys[:, 1], keys[:, 0]))
    k = keys[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(k[1:] != k[:-1], axis=1)
    return pts[np.sort(order[first])]


def gen_single_view(spec: GeneratorSpec) -> PairedDataset:
    """Single-view scans (X) vs skeletons (Y); scans keep their culled size."""
    family = spec.params.get("family", "capsule")
    cell_frac = spec.params.get("cell", 0.02)

    def make(rng):
        skel, surf, info = _skeleton_and_surface(family, spec.points_per_set, rng, spec.params)
        rot = Rotation.random(random_state=rng).as_matrix()
        skel, surf = skel @ rot.T, surf @ rot.T
        scan = simulate_single_view(surf, spec.params.get("view_dir", (0.0, 0.0, 1.0)), cell_frac * bbox_diagonal(surf))
        info.update({"family": family, "scan_size": len(scan)})
        return scan, skel, info

    return _emit(spec, make, ("scan", "skeleton"))


GENERATORS = {
    "line_disk": gen_line_disk,
    "line_bars": gen_line_bars,
    "cat_dog": gen_cat_dog,
    "parametric3d": gen_parametric3d,
    "cross_section": gen_cross_section,
    "single_view": gen_single_view,
}


def generate(spec: GeneratorSpec) -> PairedDataset:
    try:
        fn = GENERATORS[spec.kind]
    except KeyError:
        raise ConfigError(f"unknown generator kind {spec.kind!r}") from None
    return fn(spec)
