import numpy as np
import pytest
from hypothesis import given, strategies as st

from p2pnet.datasynth import (
    ConfigError,
    DegenerateShapeError,
    GeneratorSpec,
    Plane,
    bbox_diagonal,
    blue_noise,
    capsule_surface,
    ellipsoid_plane_curve,
    gen_line_bars,
    generate,
    line_bars_canonical,
    load_templates,
    normalize_pair,
    orthogonal_planes,
    parallel_planes,
    rotation_2d,
    sample_ellipse_disk,
    sample_polyline,
    simulate_single_view,
    slice_cross_sections,
)
from p2pnet.spatial import nearest_many, pairwise_distances


@pytest.mark.parametrize("kind", ["line_disk", "line_bars", "cat_dog", "parametric3d", "cross_section", "single_view"])
def test_every_generator_normalizes(kind):
    ds = generate(GeneratorSpec(kind, count=3, points_per_set=64, seed=2))
    assert len(ds) == 3
    for x, y in ds.pairs:
        both = np.concatenate([x, y])
        assert bbox_diagonal(both) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose((both.max(0) + both.min(0)) / 2, 0, atol=1e-12)
        if kind != "single_view":
            assert len(x) == len(y) == 64


def test_unknown_kind():
    with pytest.raises(ConfigError):
        generate(GeneratorSpec("teapot", count=1, points_per_set=16))


def test_generation_is_seeded():
    a = generate(GeneratorSpec("cat_dog", count=2, points_per_set=32, seed=5))
    b = generate(GeneratorSpec("cat_dog", count=2, points_per_set=32, seed=5))
    for (x1, y1), (x2, y2) in zip(a.pairs, b.pairs):
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(y1, y2)


def test_line_disk_unrotated_endpoints():
    ds = generate(GeneratorSpec("line_disk", count=1, points_per_set=4000, seed=0, params={"rotate": False, "scale_range": (1, 1)}))
    x, y = ds.pairs[0]
    xw, yw = ds.norms[0].invert(x), ds.norms[0].invert(y)
    assert xw[:, 0].min() == pytest.approx(-1, abs=5e-3) and xw[:, 0].max() == pytest.approx(1, abs=5e-3)
    np.testing.assert_array_equal(xw[:, 1] * 0, 0)
    assert yw[:, 0].min() > -1 and yw[:, 0].max() < 1


def test_disk_radial_mean():
    pts = sample_ellipse_disk(1.0, 1.0, 10_000, np.random.default_rng(0))
    assert np.linalg.norm(pts, axis=1).mean() == pytest.approx(2 / 3, rel=0.02)


def test_line_bars_construction():
    rng = np.random.default_rng(0)
    x, y = line_bars_canonical(2048, rng, False, {})
    np.testing.assert_array_equal(x[:, 1], 0)
    counts = np.bincount(np.round(y[:, 0] / 0.8).astype(int) + 1, minlength=3) / 2048
    np.testing.assert_allclose(counts, 1 / 3, atol=0.05)
    x, _ = line_bars_canonical(2000, rng, True, {})
    assert int((x[:, 1] < 0).sum()) == 200
    ds = gen_line_bars(GeneratorSpec("line_bars", count=1, points_per_set=64), protrusion=True)
    assert ds.meta[0]["protrusion"]


def test_cat_dog_contours():
    tpl = load_templates()
    assert set(tpl) == {"cat", "dog"}
    dog = tpl["dog"]
    pts = sample_polyline(dog, 500, 0.3)
    closed = np.concatenate([dog, dog[:1]])
    # every sample lies on some edge of the polyline
    for p in pts[::25]:
        best = min(_seg_dist(p, a, b) for a, b in zip(closed[:-1], closed[1:]))
        assert best < 1e-9
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    perimeter = np.linalg.norm(np.diff(closed, axis=0), axis=1).sum()
    assert gaps.max() <= 2 * perimeter / 500


def _seg_dist(p, a, b):
    t = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0, 1)
    return np.linalg.norm(p - (a + t * (b - a)))


def test_cat_dog_shared_rotation():
    spec = GeneratorSpec("cat_dog", count=1, points_per_set=400, seed=3, params={"scale_range": (1, 1)})
    ds = generate(spec)
    ang = ds.meta[0]["angle"]
    x, _ = ds.pairs[0]
    ref = generate(GeneratorSpec("cat_dog", count=1, points_per_set=400, seed=3, params={"scale_range": (1, 1), "rotate": False}))
    # undoing the stored angle recovers the unrotated orientation
    xw = ds.norms[0].invert(x) @ rotation_2d(ang)
    xr = ref.norms[0].invert(ref.pairs[0][0])
    def principal(p):
        w, v = np.linalg.eigh(np.cov((p - p.mean(0)).T))
        return abs(v[0, -1])
    assert principal(xw) == pytest.approx(principal(xr), abs=0.05)


def test_capsule_skeleton_distance():
    rng = np.random.default_rng(0)
    surf = capsule_surface(0.2, 0.5, 4000, rng)
    skel = np.zeros((50, 3))
    skel[:, 2] = np.linspace(-0.5, 0.5, 50)
    _, d = nearest_many(skel, surf)
    spacing = np.sqrt((4 * np.pi * 0.2 * 0.5 + 4 * np.pi * 0.04) / 4000)
    np.testing.assert_allclose(d, 0.2, atol=2 * spacing)


def test_blue_noise_min_distance():
    rng = np.random.default_rng(0)
    cand = rng.uniform(size=(5000, 2))
    pts, r = blue_noise(cand, 200, 0.04, rng)
    assert len(pts) == 200
    d = pairwise_distances(pts, pts) + np.eye(200) * 10
    assert d.min() >= r


def test_parametric_surface_exact_size():
    ds = generate(GeneratorSpec("parametric3d", count=2, points_per_set=128, params={"family": "ellipsoid"}))
    assert all(len(y) == 128 for _, y in ds.pairs)


def test_ellipsoid_equator_cut():
    axes = (0.9, 0.6, 0.4)
    pts = slice_cross_sections(("ellipsoid", axes), [Plane((0, 0, 1), 0.0)], 300, np.random.default_rng(1))
    resid = (pts[:, 0] / 0.9) ** 2 + (pts[:, 1] / 0.6) ** 2 - 1
    assert np.abs(resid).max() < 1e-6 and np.abs(pts[:, 2]).max() < 1e-12
    assert ellipsoid_plane_curve(axes, Plane((1, 0, 0), 2.0)) is None


def test_parallel_slabs_and_orthogonal_preset():
    rng = np.random.default_rng(0)
    dense = rng.uniform(-1, 1, (20000, 3))
    planes = parallel_planes(0, (-0.3, -0.1, 0.1, 0.3))
    x = slice_cross_sections(dense, planes, 500, rng, h=0.01)
    assert np.all(np.min(np.abs(x[:, :1] - np.array([-0.3, -0.1, 0.1, 0.3])), axis=1) <= 0.01)
    assert len(orthogonal_planes()) == 3


def test_single_view_rules():
    assert len(simulate_single_view(np.array([[0.0, 0, 0]]), (0, 0, 1), 0.1)) == 1
    two = np.array([[0.02, 0, 0.5], [0.03, 0, -0.5]])  # same 0.1 cell
    np.testing.assert_array_equal(simulate_single_view(two, (0, 0, 1), 0.1), two[1:])
    rng = np.random.default_rng(0)
    # dense enough that every image cell holds some front-facing sample
    d = rng.normal(size=(50_000, 3))
    sphere = d / np.linalg.norm(d, axis=1, keepdims=True)
    kept = simulate_single_view(sphere, (0, 0, 1), 0.05)
    assert kept[:, 2].max() <= 0.05


def test_normalize_pair_rules():
    cube = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float) * 7
    xn, yn, norm = normalize_pair(cube, cube)
    assert bbox_diagonal(xn) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DegenerateShapeError):
        normalize_pair(np.zeros((2, 2)), np.zeros((3, 2)))


@given(st.integers(0, 1000))
def test_normalization_roundtrip_and_similarity(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(10, 3)) * 5, rng.normal(size=(7, 3)) + 3
    xn, yn, norm = normalize_pair(x, y)
    np.testing.assert_allclose(norm.invert(xn), x, atol=1e-12)
    np.testing.assert_allclose(pairwise_distances(xn, yn) * norm.scale, pairwise_distances(x, y), rtol=1e-12, atol=1e-12)
