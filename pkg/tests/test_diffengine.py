import numpy as np
import pytest

from leafkit.backend import init_backend
from leafkit.diffengine import (
    SIGMA_LP_MIN,
    AdamState,
    ModelSpec,
    ParamVector,
    adam_step,
    backward,
    cosine_annealing_lr,
    grad_check,
    init_param_vector,
    load_checkpoint,
    loss_only,
    save_checkpoint,
)
from leafkit.errors import FormatError, NumericsError, SpecError
from leafkit.filterbank import SIGMA_MIN, GaborFilterbank

MSPEC = ModelSpec(n_filters=8, kernel_width=101, lp_width=101, stride=40,
                  fs_hz=16000, n_hidden=16, n_classes=3)


def _pv(seed=0):
    rng = np.random.default_rng(seed)
    bank = GaborFilterbank(np.sort(rng.uniform(0.08, 0.92, 8)), rng.uniform(4.0, 20.0, 8), 101)
    return init_param_vector(bank, MSPEC, sigma_lp_init=15.0, backend_seed=seed)


def _clip(seed=0, n=800):
    return np.random.default_rng(seed).uniform(-0.5, 0.5, n)[None, :]


def test_param_vector_roundtrip():
    pv = _pv(1)
    fp = pv.frontend_params()
    model = pv.backend_model()
    rebuilt = ParamVector.from_parts(fp, model, MSPEC)
    np.testing.assert_array_equal(rebuilt.values, pv.values)


def test_param_vector_projection_and_boundary_mask():
    pv = _pv(2)
    slices, _ = MSPEC.layout()
    pv.values[slices["eta"]][0] = 1.7
    pv.values[slices["sigma_bw"]][1] = 0.01
    pv.values[slices["sigma_lp"]][2] = -3.0
    proj = pv.project()
    assert proj.values[slices["eta"]][0] == 1.0
    assert proj.values[slices["sigma_bw"]][1] == SIGMA_MIN
    assert proj.values[slices["sigma_lp"]][2] == SIGMA_LP_MIN
    mask = proj.boundary_mask()
    assert mask[slices["eta"].start]
    assert mask[slices["sigma_bw"].start + 1]
    assert mask[slices["sigma_lp"].start + 2]
    assert not mask[slices["pcen_alpha"]].any()


def test_backward_matches_finite_differences():
    pv = _pv(3)
    report = grad_check(pv, _clip(3), np.array([1]), h=2e-5, seed=0)
    assert report.passed, [(g.group, g.max_rel_err) for g in report.groups]
    assert report.max_rel_err < 1e-4
    for g in report.groups:
        assert g.n_checked == 8


def test_grad_check_skips_boundary_sigma():
    pv = _pv(4)
    slices, _ = MSPEC.layout()
    pv.values[slices["sigma_bw"]][0] = SIGMA_MIN  # exactly on the clamp
    report = grad_check(pv, _clip(4), np.array([0]), h=2e-5, seed=0)
    sigma_group = next(g for g in report.groups if g.group == "sigma_bw")
    assert sigma_group.n_skipped == 1
    assert sigma_group.n_checked == 7
    assert report.passed


def test_backward_dead_path_zero_gradient():
    pv = _pv(5)
    result = backward(np.zeros((1, 800)), np.array([2]), pv)
    slices, _ = MSPEC.layout()
    # zero clip -> zero features -> first-layer weights have no influence
    np.testing.assert_array_equal(result.grads.values[slices["backend_w1"]], 0.0)
    assert np.any(result.grads.values[slices["backend_b2"]] != 0.0)


def test_backward_batch_duplication_invariance():
    pv = _pv(6)
    x = np.vstack([_clip(10), _clip(11)])
    labels = np.array([0, 2])
    single = backward(x, labels, pv)
    doubled = backward(np.vstack([x, x]), np.concatenate([labels, labels]), pv)
    assert doubled.loss == pytest.approx(single.loss, rel=1e-12)
    np.testing.assert_allclose(doubled.grads.values, single.grads.values, rtol=1e-9, atol=1e-18)


def test_backward_input_validation():
    pv = _pv(7)
    with pytest.raises(SpecError):
        backward(np.zeros((0, 800)), np.array([], dtype=int), pv)
    with pytest.raises(SpecError):
        backward(_clip(1), np.array([0, 1]), pv)
    with pytest.raises(SpecError):
        backward(_clip(1), np.array([0]), pv, loss="hinge")


def test_backward_nan_clip_raises_numerics():
    pv = _pv(8)
    bad = _clip(8)
    bad[0, 10] = np.nan
    with pytest.raises(NumericsError) as err:
        backward(bad, np.array([0]), pv)
    assert err.value.stage == "band_energies"


def test_adam_zero_gradient_fixed_point():
    pv = _pv(9)
    state = AdamState.zeros(len(pv.values))
    zero = ParamVector(np.zeros_like(pv.values), MSPEC)
    new_state, new_pv = adam_step(state, pv, zero, lr=0.01)
    np.testing.assert_array_equal(new_pv.values, pv.values)
    assert new_state.step == 1


def test_adam_first_step_magnitude():
    # step 1 with gradient g: bias corrections cancel, |delta| = lr * |g|/(|g|+eps)
    pv = _pv(10)
    state = AdamState.zeros(len(pv.values))
    g = np.full_like(pv.values, 0.5)
    _, new_pv = adam_step(state, pv, ParamVector(g, MSPEC), lr=0.001)
    moved = pv.values - new_pv.values
    interior = ~pv.boundary_mask()
    np.testing.assert_allclose(np.abs(moved[interior]), 0.001, atol=1e-6)


def test_adam_projects_infeasible_eta():
    pv = _pv(11)
    slices, _ = MSPEC.layout()
    pv.values[slices["eta"]][-1] = 0.9999
    g = np.zeros_like(pv.values)
    g[slices["eta"].stop - 1] = -1.0  # pushes eta upward
    _, new_pv = adam_step(AdamState.zeros(len(g)), pv, ParamVector(g, MSPEC), lr=0.01)
    assert new_pv.values[slices["eta"].stop - 1] == 1.0


def test_adam_rejects_nonfinite():
    pv = _pv(12)
    g = np.zeros_like(pv.values)
    g[0] = np.inf
    with pytest.raises(NumericsError):
        adam_step(AdamState.zeros(len(g)), pv, ParamVector(g, MSPEC), lr=0.01)


def test_cosine_annealing_schedule():
    assert cosine_annealing_lr(0, 100, 1e-3, 1e-5) == pytest.approx(1e-3)
    assert cosine_annealing_lr(50, 100, 1e-3, 1e-5) == pytest.approx((1e-3 + 1e-5) / 2)
    assert cosine_annealing_lr(100, 100, 1e-3, 1e-5) == pytest.approx(1e-3)  # warm restart
    with pytest.raises(SpecError):
        cosine_annealing_lr(1, 0, 1e-3, 1e-5)
    with pytest.raises(SpecError):
        cosine_annealing_lr(-1, 10, 1e-3, 1e-5)


def test_checkpoint_roundtrip(tmp_path):
    pv = _pv(13)
    state = AdamState(np.random.default_rng(0).random(len(pv.values)),
                      np.random.default_rng(1).random(len(pv.values)), step=17)
    path = tmp_path / "ck.ckpt"
    save_checkpoint(path, pv, state, {"epoch": 4, "rng": "12345"})
    pv2, state2, extras = load_checkpoint(path)
    np.testing.assert_array_equal(pv2.values, pv.values)
    np.testing.assert_array_equal(state2.m, state.m)
    np.testing.assert_array_equal(state2.v, state.v)
    assert state2.step == 17
    assert pv2.mspec == MSPEC
    assert extras == {"epoch": "4", "rng": "12345"}


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("not a checkpoint\n")
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_loss_only_matches_backward_loss():
    pv = _pv(14)
    x = _clip(14)
    labels = np.array([1])
    assert loss_only(x, labels, pv) == pytest.approx(backward(x, labels, pv).loss, rel=1e-12)


def test_backend_shapes():
    model = init_backend(8, 16, 3, seed=0)
    assert model.w1.shape == (16, 8)
    assert model.w2.shape == (3, 16)
    assert model.n_classes == 3
