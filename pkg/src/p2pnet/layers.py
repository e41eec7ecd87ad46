"""Hierarchical point features (set abstraction / feature propagation) and the displacement head.

One directional branch maps a point set ``x`` (n, dim) to a displacement
field (n, dim). Everything runs with an optional leading batch axis so a
mini-batch of equally sized sets goes through in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import ContractError, Tensor
from .spatial import ball_query_many, farthest_point_sample, pairwise_distances, smallest_k


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    widths: tuple[int, ...]
    K: int = 0
    r: float = 0.0
    cap: int = 32

    def __post_init__(self):
        if self.kind not in ("SA", "FP", "FC"):
            raise ContractError(f"unknown layer kind {self.kind!r}")
        if not self.widths or any(w <= 0 for w in self.widths):
            raise ContractError(f"{self.kind} widths must be non-empty and positive: {self.widths}")
        if self.kind == "SA" and (self.K < 1 or self.r <= 0 or self.cap < 1):
            raise ContractError(f"SA layer needs K >= 1, r > 0, cap >= 1: {self}")

    @property
    def width(self) -> int:
        return self.widths[-1]


def SA(K: int, r: float, widths, cap: int = 32) -> LayerSpec:
    return LayerSpec("SA", tuple(widths), K=K, r=r, cap=cap)


def FP(widths) -> LayerSpec:
    return LayerSpec("FP", tuple(widths))


def FC(width: int) -> LayerSpec:
    return LayerSpec("FC", (width,))


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture of one branch.

    ``n_points`` is the input size the SA patch counts were written for;
    other input sizes rescale every ``K > 1`` proportionally.
    """

    dim: int = 3
    sa_layers: tuple[LayerSpec, ...] = ()
    fp_layers: tuple[LayerSpec, ...] = ()
    fc_head: tuple[LayerSpec, ...] = ()
    noise_len: int = 32
    noise_std: float = 1.0
    n_points: int = 2048
    xyz_skip: bool = True

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ContractError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.fp_layers) != len(self.sa_layers):
            raise ContractError("number of FP layers must equal number of SA layers")
        if not self.fc_head or self.fc_head[-1].width != self.dim:
            raise ContractError("final FC width must equal dim")
        if self.noise_len < 0:
            raise ContractError("noise_len must be >= 0")

    def without_noise(self) -> "NetworkConfig":
        return replace(self, noise_len=0)


def full_preset(dim: int = 3, noise_len: int = 32, noise_std: float = 1.0) -> NetworkConfig:
    """The full-size layer listing for 2,048-point inputs."""
    return NetworkConfig(
        dim=dim,
        sa_layers=(
            SA(1024, 0.1, [64, 64, 128]),
            SA(384, 0.2, [128, 128, 256]),
            SA(128, 0.4, [256, 256, 512]),
            SA(1, 1.0, [512, 512, 1024]),
        ),
        fp_layers=(FP([512, 512]), FP([512, 256]), FP([256, 128]), FP([128, 128, 128])),
        fc_head=(FC(128), FC(64), FC(dim)),
        noise_len=noise_len,
        noise_std=noise_std,
        n_points=2048,
    )


def desk_preset(dim: int = 3, noise_len: int = 32, noise_std: float = 1.0, n_points: int = 256) -> NetworkConfig:
    """Proportionally shrunk architecture for 256-point inputs."""
    return NetworkConfig(
        dim=dim,
        sa_layers=(
            SA(128, 0.1, [16, 16, 32], cap=16),
            SA(48, 0.2, [32, 32, 64], cap=16),
            SA(16, 0.4, [64, 64, 128], cap=16),
            SA(1, 1.0, [128, 128, 256], cap=16),
        ),
        fp_layers=(FP([128, 128]), FP([128, 64]), FP([64, 32]), FP([32, 32, 32])),
        fc_head=(FC(128), FC(64), FC(dim)),
        noise_len=noise_len,
        noise_std=noise_std,
        n_points=n_points,
    )


def param_shapes(cfg: NetworkConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}

    def mlp(prefix, cin, widths):
        for i, w in enumerate(widths):
            shapes[f"{prefix}.w{i}"] = (cin, w)
            shapes[f"{prefix}.b{i}"] = (w,)
            cin = w
        return cin

    level_ch = [cfg.dim if cfg.xyz_skip else 0]
    c = 0
    for i, spec in enumerate(cfg.sa_layers):
        c = mlp(f"sa{i}", cfg.dim + c, spec.widths)
        level_ch.append(c)
    coarse = level_ch[-1]
    for j, spec in enumerate(cfg.fp_layers):
        fine = level_ch[len(cfg.sa_layers) - 1 - j]
        coarse = mlp(f"fp{j}", coarse + fine, spec.widths)
    mlp("head", coarse + cfg.noise_len, [s.width for s in cfg.fc_head])
    return shapes


def init_params(cfg: NetworkConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """Glorot-uniform weights and zero biases, in a fixed key order."""
    params = {}
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 2:
            lim = np.sqrt(6.0 / (shape[0] + shape[1]))
            data = rng.uniform(-lim, lim, size=shape)
        else:
            data = np.zeros(shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def zero_params(cfg: NetworkConfig) -> dict[str, Tensor]:
    return {k: Tensor(np.zeros(s), requires_grad=True, name=k) for k, s in param_shapes(cfg).items()}


def _mlp(h: Tensor, params, prefix: str, n_layers: int, last_relu: bool = True, first: int = 0) -> Tensor:
    for i in range(first, n_layers):
        h = ad.linear(h, params[f"{prefix}.w{i}"], params[f"{prefix}.b{i}"])
        if last_relu or i < n_layers - 1:
            h = ad.relu(h)
    return h


def _batched(xyz: np.ndarray) -> np.ndarray:
    return xyz if xyz.ndim == 3 else xyz[None]


def scaled_patch_count(spec: LayerSpec, n_level: int, n_input: int, n_ref: int) -> int:
    if spec.K == 1:
        return 1
    k = int(round(spec.K * n_input / n_ref))
    return max(1, min(k, n_level))


def set_abstraction(xyz, feats: Tensor | None, spec: LayerSpec, params, prefix: str, seeds=0, K: int | None = None):
    """Sample centroids, group ball neighborhoods, run the shared MLP and max-pool.

    ``xyz`` is (B, n, dim) or (n, dim); returns centroid coordinates and a
    feature tensor with ``spec.width`` channels per centroid.
    """
    unbatched = np.ndim(xyz) == 2
    xyz = _batched(np.asarray(xyz, dtype=np.float64))
    if feats is not None and unbatched:
        feats = ad.reshape(feats, (1,) + feats.shape)
    b, n, _ = xyz.shape
    K = spec.K if K is None else K
    if K == 1:
        new_xyz = xyz.mean(axis=1, keepdims=True)
        idx = np.broadcast_to(np.arange(n), (b, 1, n))
    else:
        if K > n:
            raise ContractError(f"SA layer asks for {K} patches from {n} points")
        cent = farthest_point_sample(xyz, K, seeds)
        new_xyz = np.take_along_axis(xyz, cent[..., None], axis=1)
        idx = ball_query_many(new_xyz, xyz, spec.r, spec.cap)
    grouped = np.take_along_axis(xyz[:, None, :, :], idx[..., None], axis=2) if K != 1 else xyz[:, None]
    local = grouped - new_xyz[:, :, None, :]
    dim = xyz.shape[-1]
    w0, b0 = params[f"{prefix}.w0"], params[f"{prefix}.b0"]
    if feats is None:
        h = ad.linear(local, w0, b0)
    else:
        # first layer on [local, feats] split in two so the feature half runs
        # once per point instead of once per patch member
        h = ad.linear(local, ad.index(w0, slice(0, dim)), b0)
        per_point = ad.matmul(feats, ad.index(w0, slice(dim, None)))
        h = ad.add(h, ad.gather_points(per_point, idx))
    h = ad.relu(h)
    h = _mlp(h, params, prefix, len(spec.widths), first=1)
    out = ad.reduce_max_over_group(h)
    if unbatched:
        return new_xyz[0], ad.reshape(out, out.shape[1:])
    return new_xyz, out


def interpolation_weights(fine_xyz: np.ndarray, coarse_xyz: np.ndarray, k: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the ``k`` nearest coarse points and normalized 1/d^2 weights (d clamped at 1e-8)."""
    nc = coarse_xyz.shape[-2]
    if nc == 1:
        shape = fine_xyz.shape[:-1] + (1,)
        return np.zeros(shape, dtype=np.int64), np.ones(shape)
    d = pairwise_distances(fine_xyz, coarse_xyz)
    k = min(k, nc)
    order = smallest_k(d, k)
    dk = np.maximum(np.take_along_axis(d, order, axis=-1), 1e-8)
    w = 1.0 / (dk * dk)
    return order, w / w.sum(axis=-1, keepdims=True)


def feature_propagation(coarse_xyz, coarse_feats: Tensor, fine_xyz, fine_feats: Tensor | None, spec: LayerSpec, params, prefix: str) -> Tensor:
    """Interpolate coarse features onto the fine points, append skip features, run the MLP."""
    idx, w = interpolation_weights(np.asarray(fine_xyz), np.asarray(coarse_xyz))
    h = ad.interpolate(coarse_feats, idx, w)
    if fine_feats is not None:
        h = ad.concat(h, fine_feats)
    return _mlp(h, params, prefix, len(spec.widths))


def noise_augment(features: Tensor, noise_len: int, noise_std: float, rng: np.random.Generator | None) -> Tensor:
    """Append ``noise_len`` i.i.d. N(0, noise_std^2) channels to every point."""
    if noise_len == 0:
        return features
    if rng is None:
        raise ContractError("noise augmentation needs an rng")
    noise = rng.standard_normal(features.shape[:-1] + (noise_len,)) * noise_std
    return ad.concat(features, Tensor(noise))


def fps_seeds(xyz: np.ndarray, mode, rng: np.random.Generator | None) -> np.ndarray:
    """Per-batch-element FPS start index: an int, ``"random"`` or ``"lexmin"``."""
    b, n, _ = xyz.shape
    if mode == "random":
        if rng is None:
            raise ContractError("random FPS seeds need an rng")
        return rng.integers(0, n, size=b)
    if mode == "lexmin":
        return np.array([np.lexsort(x.T[::-1])[0] for x in xyz], dtype=np.int64)
    return np.full(b, int(mode), dtype=np.int64)


def branch_forward(x, cfg: NetworkConfig, params, rng: np.random.Generator | None = None, fps_seed=0) -> Tensor:
    """Displacements for ``x`` of shape (n, dim) or (B, n, dim).

    ``fps_seed`` picks the first centroid of every SA layer: an index,
    ``"random"`` (training) or ``"lexmin"`` (the lexicographically smallest
    point, which makes the output follow input permutations).
    """
    x = np.asarray(x, dtype=np.float64)
    unbatched = x.ndim == 2
    xyz = _batched(x)
    b, n, dim = xyz.shape
    if dim != cfg.dim:
        raise ContractError(f"input dim {dim} does not match config dim {cfg.dim}")
    seeds = fps_seeds(xyz, fps_seed, rng)
    levels_xyz = [xyz]
    levels_feat: list[Tensor | None] = [Tensor(xyz) if cfg.xyz_skip else None]
    cur_xyz, cur_feat = xyz, None
    for i, spec in enumerate(cfg.sa_layers):
        K = scaled_patch_count(spec, cur_xyz.shape[1], n, cfg.n_points)
        # later levels start from their first point, which is the previous level's seed
        cur_xyz, cur_feat = set_abstraction(cur_xyz, cur_feat, spec, params, f"sa{i}", seeds if i == 0 else 0, K)
        levels_xyz.append(cur_xyz)
        levels_feat.append(cur_feat)
    depth = len(cfg.sa_layers)
    feat = levels_feat[-1]
    for j, spec in enumerate(cfg.fp_layers):
        fine = depth - 1 - j
        feat = feature_propagation(
            levels_xyz[fine + 1], feat, levels_xyz[fine], levels_feat[fine], spec, params, f"fp{j}"
        )
    feat = noise_augment(feat, cfg.noise_len, cfg.noise_std, rng)
    out = _mlp(feat, params, "head", len(cfg.fc_head), last_relu=False)
    if unbatched:
        out = ad.reshape(out, out.shape[1:])
    return out


def apply_displacements(x, d) -> np.ndarray | Tensor:
    """``x + d``; keeps the tape when ``d`` is a tensor."""
    x_arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    d_shape = d.shape if isinstance(d, Tensor) else np.shape(d)
    if x_arr.shape != tuple(d_shape):
        raise ContractError(f"cardinality mismatch: points {x_arr.shape} vs displacements {tuple(d_shape)}")
    if isinstance(d, Tensor) or isinstance(x, Tensor):
        return ad.add(x, d)
    return x_arr + np.asarray(d, dtype=np.float64)
