import numpy as np
import pytest

from p2pnet.autodiff import ContractError, NumericError, Tensor
from p2pnet.datasynth import GeneratorSpec, PairedDataset, generate
from p2pnet.layers import desk_preset
from p2pnet.trainer import (
    AdamState,
    TrainConfig,
    TrainingError,
    adam_step,
    infer_multipass,
    lr_at,
    parse_ablation,
    predict,
    train,
)


def test_adam_zero_gradient():
    p = {"w": Tensor(np.array([1.0, -2.0]))}
    st = AdamState(m={"w": np.array([0.5, 0.5])}, v={"w": np.array([0.1, 0.1])}, step=3)
    adam_step(p, {"w": np.zeros(2)}, st, 1e-3)
    np.testing.assert_allclose(st.m["w"], 0.45)
    np.testing.assert_allclose(st.v["w"], 0.0999)
    assert not np.array_equal(p["w"].data, [1.0, -2.0])  # momentum still moves it


def test_adam_zero_gradient_from_rest():
    p = {"w": Tensor(np.array([1.0, -2.0]))}
    adam_step(p, {"w": np.zeros(2)}, AdamState(), 1e-3)
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])


def test_adam_hand_trace():
    p = {"x": Tensor(np.array([0.5]))}
    st = AdamState()
    x, m, v = 0.5, 0.0, 0.0
    for t, g in enumerate([0.2, -0.1, 0.4], start=1):
        adam_step(p, {"x": np.array([g])}, st, 0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert p["x"].data[0] == pytest.approx(x, abs=1e-12)


def test_adam_constant_gradient_step_tends_to_lr():
    p = {"x": Tensor(np.array([0.0]))}
    st = AdamState()
    for _ in range(2000):
        before = p["x"].data[0]
        adam_step(p, {"x": np.array([3.0])}, st, 1e-3)
    assert before - p["x"].data[0] == pytest.approx(1e-3, rel=1e-6)


def test_adam_rejects_non_finite_before_moving():
    p = {"a": Tensor(np.ones(2)), "b": Tensor(np.ones(2))}
    with pytest.raises(NumericError, match="b"):
        adam_step(p, {"a": np.ones(2), "b": np.array([np.nan, 1.0])}, AdamState(), 1e-3)
    np.testing.assert_array_equal(p["a"].data, 1.0)


def test_schedule():
    cfg = TrainConfig(epochs=200)
    assert lr_at(0, cfg) == 1e-3 and lr_at(199, cfg) == 1e-4
    assert [lr_at(e, cfg) for e in (49, 50, 100, 149, 150)] == [1e-3, 5e-4, 2.5e-4, 2.5e-4, 1e-4]
    plain = TrainConfig(epochs=200, terminal_floor=False)
    assert lr_at(199, plain) == 1.25e-4
    with pytest.raises(ContractError):
        TrainConfig(decay_points=(0.5, 0.25))


def test_parse_ablation():
    assert parse_ablation("ns+rg-") == {"noise": True, "crossreg": False}
    assert TrainConfig(noise=False, crossreg=True).ablation_tag == "ns-rg+"
    with pytest.raises(ContractError):
        parse_ablation("ns*rg+")


def tiny_dataset(count=4, n=32, seed=0):
    return generate(GeneratorSpec("line_disk", count=count, points_per_set=n, seed=seed))


def test_identical_pair_loss_decreases():
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.3, 0.3, (32, 2))
    ds = PairedDataset([(x, x.copy())], [None])
    ck = train(ds, desk_preset(2, n_points=32), TrainConfig(epochs=15, noise=False, batch_size=1, seed=1))
    totals = [h[2].total for h in ck.history]
    assert totals[-1] < totals[0]


def test_crossreg_switch_excludes_reg_from_total():
    ck = train(tiny_dataset(2), desk_preset(2, n_points=32), TrainConfig(epochs=1, crossreg=False))
    b = ck.history[0][2]
    assert b.cross_reg > 0
    assert b.total == pytest.approx(b.shape_xy + b.density_xy + b.shape_yx + b.density_yx, rel=1e-12)


def test_training_is_deterministic():
    lines = [[], []]
    cks = [train(tiny_dataset(), desk_preset(2, n_points=32), TrainConfig(epochs=2, seed=4), lines[i].append) for i in range(2)]
    assert lines[0] == lines[1]
    for k in cks[0].params_xy:
        np.testing.assert_array_equal(cks[0].params_xy[k], cks[1].params_xy[k])


def test_train_validates_inputs():
    with pytest.raises(ContractError):
        train(PairedDataset([], []), desk_preset(2), TrainConfig(epochs=1))
    with pytest.raises(ContractError):
        train(tiny_dataset(1), desk_preset(3), TrainConfig(epochs=1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_training_raises():
    ds = tiny_dataset(1)
    ds.pairs[0] = (ds.pairs[0][0] * 1e300, ds.pairs[0][1])
    with pytest.raises((TrainingError, NumericError)):
        train(ds, desk_preset(2, n_points=32), TrainConfig(epochs=1))


def test_multipass_contract():
    cfg = desk_preset(2, n_points=32)
    ck = train(tiny_dataset(1), cfg, TrainConfig(epochs=1))
    c, p = ck.branch("xy")
    x = tiny_dataset(1, seed=9).pairs[0][0]
    one = infer_multipass(x, c, p, 1, np.random.default_rng(0))
    assert one.shape == (32, 2)
    eight = infer_multipass(x, c, p, 8, np.random.default_rng(0)).reshape(8, 32, 2)
    assert not np.array_equal(eight[0], eight[1])
    quiet = train(tiny_dataset(1), cfg, TrainConfig(epochs=1, noise=False))
    qc, qp = quiet.branch("xy")
    same = infer_multipass(x, qc, qp, 3, None).reshape(3, 32, 2)
    np.testing.assert_array_equal(same[0], same[2])
    np.testing.assert_array_equal(same[0], predict(x, qc, qp, None))
    with pytest.raises(ContractError):
        ck.branch("zz")
