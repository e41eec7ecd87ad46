import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from p2pnet import autodiff as ad
from p2pnet.autodiff import DimensionError, Tensor
from p2pnet.losses import (
    LossWeights,
    combined_loss,
    cross_reg_loss,
    density_loss,
    density_vector,
    lift,
    shape_loss,
)

from conftest import brute_dist


def ref_shape(p, t):
    d = brute_dist(p, t)
    return d.min(axis=0).sum() + d.min(axis=1).sum()


def ref_density(p, t, k):
    dtt, dtp = brute_dist(t, t), brute_dist(t, p)
    avail = min((dtt != 0).sum(axis=1).min(), (dtp != 0).sum(axis=1).min())
    k = min(k, len(t) - 1, avail)
    total = 0.0
    for i in range(len(t)):
        vt = sorted(x for x in dtt[i] if x != 0)[:k]
        vp = sorted(x for x in dtp[i] if x != 0)[:k]
        total += sum(abs(a - b) for a, b in zip(vt, vp)) / k
    return total


def ref_cross(x, ix, y, iy):
    a = np.concatenate([x, x + ix], axis=1)
    b = np.concatenate([y + iy, y], axis=1)
    return ref_shape(a, b)


def test_shape_loss_examples():
    assert float(shape_loss([[0.0, 0, 0]], [[3.0, 4, 0]]).data) == 10.0
    assert float(shape_loss([[0.0, 0], [2, 0]], [[1.0, 0]]).data) == 3.0
    with pytest.raises(DimensionError):
        shape_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_density_vector_examples():
    np.testing.assert_array_equal(density_vector([0, 0], [[0, 0], [1, 0], [3, 0]], 2), [1, 3])
    grid = np.array([[i, j] for i in range(3) for j in range(3)], dtype=float)
    np.testing.assert_array_equal(density_vector([1, 1], grid, 4), [1, 1, 1, 1])


def test_density_loss_hand_example():
    t = np.array([[0.0, 0.0], [1.0, 0.0]])
    p = np.array([[0.0, 0.0], [1.5, 0.0]])
    assert float(density_loss(p, t, k=8).data) == pytest.approx(1.0, abs=1e-15)


def test_density_loss_grows_with_spacing_gap():
    t = np.stack([np.linspace(0, 1, 32), np.zeros(32)], axis=1)
    vals = []
    for factor in (1, 2, 4):
        p = np.stack([np.linspace(0, 1, 32 * factor), np.zeros(32 * factor)], axis=1)
        vals.append(float(density_loss(p, t, 4).data))
    assert vals[0] == 0.0 and 0 < vals[1] < vals[2]


def test_cross_reg_examples():
    x, ix = np.array([[0.0, 0, 0]]), np.array([[1.0, 0, 0]])
    y = np.array([[1.0, 0, 0]])
    assert float(cross_reg_loss(x, ix, y, np.array([[-1.0, 0, 0]])).data) == 0.0
    assert float(cross_reg_loss(x, ix, y, np.zeros((1, 3))).data) == 2.0
    np.testing.assert_array_equal(lift(x, Tensor(ix)).data, [[0, 0, 0, 1, 0, 0]])


@pytest.mark.parametrize("trial", range(100))
def test_losses_match_brute_force(trial):
    rng = np.random.default_rng(10_000 + trial)
    n, m = int(rng.integers(2, 80)), int(rng.integers(2, 80))
    dim = int(rng.choice([2, 3]))
    p, t = rng.uniform(size=(n, dim)), rng.uniform(size=(m, dim))
    if trial % 5 == 0:
        shared = min(n, m) // 2  # exact coincidences exercise the skip rule
        p[:shared] = t[:shared]
    assert float(shape_loss(p, t).data) == pytest.approx(ref_shape(p, t), rel=1e-12)
    if m >= 2:
        assert float(density_loss(p, t, 8).data) == pytest.approx(ref_density(p, t, 8), rel=1e-12)
    x, y = rng.uniform(size=(n, dim)), rng.uniform(size=(m, dim))
    ix, iy = rng.normal(size=x.shape), rng.normal(size=y.shape)
    assert float(cross_reg_loss(x, ix, y, iy).data) == pytest.approx(ref_cross(x, ix, y, iy), rel=1e-12)
    q = rng.uniform(size=dim)
    ref = np.sort(brute_dist(q[None], t)[0])[: min(8, m)]
    np.testing.assert_array_equal(density_vector(q, t, 8, exclude_coincident=False), ref)


@given(arrays(np.float64, (12, 2), elements=st.floats(-1, 1), unique=True))
def test_fixed_points(a):
    assert float(shape_loss(a, a).data) == 0.0
    assert float(density_loss(a, a[::-1], 8).data) == 0.0


def test_perfect_inverse_pair_total_is_zero(rng):
    x = rng.uniform(size=(20, 2))
    y = x + np.array([0.3, -0.1])
    total, br = combined_loss(x, y, y - x, x - y)
    assert br.total == 0.0 and float(total.data) == 0.0


def test_combined_loss_recomposes(rng):
    x, y = rng.uniform(size=(30, 3)), rng.uniform(size=(25, 3))
    ix, iy = rng.normal(0, 0.1, x.shape), rng.normal(0, 0.1, y.shape)
    w = LossWeights(lambda_density=0.7, mu_reg=0.3)
    total, br = combined_loss(x, y, ix, iy, w)
    parts = (
        float(shape_loss(x + ix, y).data)
        + 0.7 * float(density_loss(x + ix, y).data)
        + float(shape_loss(y + iy, x).data)
        + 0.7 * float(density_loss(y + iy, x).data)
        + 0.3 * float(cross_reg_loss(x, ix, y, iy).data)
    )
    assert br.total == pytest.approx(parts, abs=1e-12)
    no_reg, br0 = combined_loss(x, y, ix, iy, LossWeights(0.7, 0.0))
    assert br0.total == pytest.approx(parts - 0.3 * br.cross_reg, abs=1e-12)
    skip, br1 = combined_loss(x, y, ix, iy, w, use_reg=False)
    assert br1.cross_reg == br.cross_reg and br1.total == pytest.approx(br0.total, abs=1e-12)


def test_loss_gradients_finite_difference(rng):
    p, t = rng.uniform(size=(8, 2)), rng.uniform(size=(8, 2))
    assert ad.finite_diff_check(lambda v: shape_loss(v, t), p) < 1e-5
