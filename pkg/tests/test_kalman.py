import math

import numpy as np
import pytest
import scipy.linalg

from pmsim.kalman import DareError, KalmanConfig, NoiseModel, dare_residual, kalman_step, solve_dare
from pmsim.lti import StateSpaceModel, lti_step

PLANT = StateSpaceModel([[-0.5]], [1.0], [1.0], 0.0)
# positive root of p^2 + 0.71 p - 0.04 = 0
P_ROOT = (-0.71 + math.sqrt(0.71**2 + 4 * 0.04)) / 2


def test_reference_scalars_closed_form():
    p, l = solve_dare([[-0.5]], [[1.0]], [[0.04]], 1.0)
    assert abs(p.item() - P_ROOT) < 1e-12
    assert p.item() == pytest.approx(0.05246, abs=1e-5)
    assert l.item() == pytest.approx(-0.5 * P_ROOT / (P_ROOT + 1), abs=1e-14)
    assert l.item() == pytest.approx(-0.02492, abs=1e-5)
    assert dare_residual([[-0.5]], [[1.0]], [[0.04]], 1.0, p) < 1e-10
    assert abs(-0.5 - l.item()) < 1


def test_zero_process_noise():
    p, l = solve_dare([[-0.5]], [[1.0]], [[0.0]], 1.0)
    assert p.item() == 0.0 and l.item() == 0.0


def test_memoryless_dynamics():
    p, l = solve_dare([[0.0]], [[1.0]], [[0.3]], 2.0)
    assert p.item() == pytest.approx(0.3, abs=1e-15)
    assert l.item() == 0.0


def test_matches_scipy_on_random_systems():
    rng = np.random.default_rng(11)
    for _ in range(30):
        n = int(rng.integers(1, 4))
        a = rng.normal(size=(n, n))
        a *= rng.uniform(0.2, 0.95) / max(abs(np.linalg.eigvals(a)))
        c = rng.normal(size=(1, n))
        g = rng.normal(size=(n, 1))
        q = g @ g.T * rng.uniform(0.01, 2)
        r = rng.uniform(0.1, 3)
        p, l = solve_dare(a, c, q, r)
        p_ref = scipy.linalg.solve_discrete_are(a.T, c.T, q, np.array([[r]]))
        assert np.allclose(p, p_ref, rtol=1e-9, atol=1e-12)
        assert np.allclose(l, a @ p_ref @ c.T / (c @ p_ref @ c.T + r), atol=1e-10)
        assert max(abs(np.linalg.eigvals(a - l @ c))) < 1


def test_non_convergence_reported():
    # unstable mode invisible to the measurement: p grows without bound
    with pytest.raises(DareError) as info:
        solve_dare([[2.0]], [[0.0]], [[1.0]], 1.0, max_iter=500)
    assert "did not converge" in str(info.value)


def test_rejects_nonpositive_r():
    with pytest.raises(ValueError):
        solve_dare([[0.5]], [[1.0]], [[0.1]], 0.0)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel([0.2], qw=-1)
    with pytest.raises(ValueError):
        NoiseModel([0.2], rv=0)


def test_design_uses_g_qw():
    cfg = KalmanConfig.design(PLANT, NoiseModel([0.2], h=0, qw=1, rv=1))
    assert abs(cfg.p.item() - P_ROOT) < 1e-12


def test_design_cross_term_matches_scipy():
    g, h, qw, rv = 0.4, 0.7, 0.5, 1.0
    cfg = KalmanConfig.design(PLANT, NoiseModel([g], h=h, qw=qw, rv=rv))
    a, c = np.array([[-0.5]]), np.array([[1.0]])
    q, s, r = np.array([[g * g * qw]]), np.array([[g * qw * h]]), np.array([[rv + h * h * qw]])
    p_ref = scipy.linalg.solve_discrete_are(a.T, c.T, q, r, s=s)
    l_ref = (a @ p_ref @ c.T + s) / (c @ p_ref @ c.T + r)
    assert cfg.p.item() == pytest.approx(p_ref.item(), abs=1e-12)
    assert cfg.gain_l.item() == pytest.approx(l_ref.item(), abs=1e-12)


def test_quiescent_filter():
    cfg = KalmanConfig.design(PLANT, NoiseModel([0.2]))
    xhat, est, yhat = kalman_step(cfg, np.zeros(1), 0.0, 0.0)
    assert xhat.tolist() == [0.0] and est == 0.0 and yhat == 0.0


def test_single_update_from_rest():
    cfg = KalmanConfig.design(PLANT, NoiseModel([0.2], qw=1, rv=1))
    xhat, est, yhat = kalman_step(cfg, np.zeros(1), 1.0, 0.0)
    assert yhat == 0.0
    assert est == 1.0


def test_matched_model_tracks_exactly():
    cfg = KalmanConfig.design(PLANT, NoiseModel([0.2], qw=1, rv=1))
    rng = np.random.default_rng(5)
    x = np.zeros(1)
    xhat = np.zeros(1)
    for u in rng.normal(size=100):
        _, y = lti_step(PLANT, x, u)
        xhat, _, yhat = kalman_step(cfg, xhat, u, y)
        x, _ = lti_step(PLANT, x, u)
        assert y - yhat == 0.0
        assert xhat.tolist() == x.tolist()


def test_convergence_bound_from_wrong_start():
    cfg = KalmanConfig.design(PLANT, NoiseModel([0.2], qw=1, rv=1))
    rate = abs(-0.5 - cfg.gain_l.item())
    rng = np.random.default_rng(9)
    x, xhat = np.array([3.0]), np.array([-1.0])
    err0 = abs(xhat.item() - x.item())
    for k in range(1, 40):
        u = rng.normal()
        x_next, y = lti_step(PLANT, x, u)
        xhat, _, _ = kalman_step(cfg, xhat, u, y)
        x = x_next
        assert abs(xhat.item() - x.item()) <= rate**k * err0 * (1 + 1e-9) + 1e-15
