"""Plant-side behavior: weights validation, closed-loop cost, simulation
determinism, and the benchmark presets."""

import numpy as np
import pytest

from ddlqr import linalg
from ddlqr.errors import InvalidInput, NotSchur
from ddlqr.system import (
    LqrWeights,
    LtiSystem,
    NoiseSpec,
    closed_loop,
    h2_norm_sq,
    laplacian3,
    laplacian3_weights,
    simulate,
)
from tests.test_linalg import SCALAR_DARE_P


def scalar_system(a=0.5):
    return LtiSystem(A=np.array([[a]]), B=np.array([[1.0]]))


def unit_weights(n=1, m=1):
    return LqrWeights(Q=np.eye(n), R=np.eye(m))


def test_weights_reject_indefinite():
    with pytest.raises(InvalidInput):
        LqrWeights(Q=np.array([[0.0]]), R=np.array([[1.0]]))
    with pytest.raises(InvalidInput):
        LqrWeights(Q=np.eye(2), R=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_weights_cached_square_roots():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 3))
    Q = M @ M.T + np.eye(3)
    w = LqrWeights(Q=Q, R=np.eye(2))
    assert np.linalg.norm(w.Q_sqrt @ w.Q_sqrt - Q, "fro") <= 1e-10 * np.linalg.norm(Q, "fro")


def test_closed_loop_trivial():
    sys_ = laplacian3()
    assert np.allclose(closed_loop(sys_, np.zeros((3, 3))), sys_.A)
    assert np.allclose(closed_loop(sys_, -sys_.A), np.zeros((3, 3)))


def test_closed_loop_dimension_check():
    with pytest.raises(InvalidInput):
        closed_loop(laplacian3(), np.zeros((2, 3)))


def test_h2_static_plant():
    sys_ = scalar_system(0.0)
    assert h2_norm_sq(sys_, unit_weights(), np.array([[0.0]])) == pytest.approx(1.0)


def test_h2_equals_riccati_cost_scalar():
    sys_ = scalar_system(0.5)
    w = unit_weights()
    K, P_ric = linalg.dare_gain(sys_.A, sys_.B, w.Q, w.R)
    cost = h2_norm_sq(sys_, w, K)
    assert cost == pytest.approx(P_ric[0, 0], abs=1e-9)
    assert cost == pytest.approx(SCALAR_DARE_P, abs=1e-9)


def test_h2_rejects_unstable_loop():
    sys_ = scalar_system(1.5)
    with pytest.raises(NotSchur):
        h2_norm_sq(sys_, unit_weights(), np.array([[0.0]]))


def test_h2_global_optimality_random_probes():
    sys_ = laplacian3()
    w = laplacian3_weights()
    K_star, _ = linalg.dare_gain(sys_.A, sys_.B, w.Q, w.R)
    best = h2_norm_sq(sys_, w, K_star)
    rng = np.random.default_rng(1)
    for _ in range(20):
        K = K_star + rng.normal(size=K_star.shape) * rng.uniform(0.01, 0.3)
        try:
            cost = h2_norm_sq(sys_, w, K)
        except NotSchur:
            continue
        assert cost >= best - 1e-8


def test_simulate_zero_everything():
    sys_ = laplacian3()
    X, D = simulate(sys_, np.zeros(3), np.zeros((5, 3)), NoiseSpec("zero"))
    assert np.all(X == 0.0)
    assert np.all(D == 0.0)


def test_simulate_accumulator():
    sys_ = LtiSystem(A=np.array([[1.0]]), B=np.array([[1.0]]))
    X, _ = simulate(sys_, [0.0], np.ones((6, 1)), NoiseSpec("zero"))
    assert np.allclose(X[:, 0], np.arange(7.0))


def test_simulate_deterministic():
    sys_ = laplacian3()
    spec = NoiseSpec("gaussian_iid", 0.1, seed=99)
    U = NoiseSpec("gaussian_iid", 1.0, seed=7).draw(10, 3)
    X1, D1 = simulate(sys_, np.zeros(3), U, spec)
    X2, D2 = simulate(sys_, np.zeros(3), U, spec)
    assert np.array_equal(X1, X2)
    assert np.array_equal(D1, D2)


def test_noise_spec_validation():
    with pytest.raises(InvalidInput):
        NoiseSpec("poisson")
    with pytest.raises(InvalidInput):
        NoiseSpec("gaussian_iid", scale=-1.0)


def test_noise_scale_preserves_realization():
    a = NoiseSpec("gaussian_iid", 1.0, seed=3).draw(4, 2)
    b = NoiseSpec("gaussian_iid", 0.1, seed=3).draw(4, 2)
    assert np.allclose(b, 0.1 * a)


def test_uniform_noise_bounded():
    draw = NoiseSpec("uniform_iid", 0.5, seed=11).draw(50, 3)
    assert np.max(np.abs(draw)) <= 0.5


def test_input_and_disturbance_streams_differ():
    from ddlqr.system import DISTURBANCE_STREAM_TAG, INPUT_STREAM_TAG

    spec = NoiseSpec("gaussian_iid", 1.0, seed=5)
    assert not np.allclose(spec.draw(4, 3, INPUT_STREAM_TAG), spec.draw(4, 3, DISTURBANCE_STREAM_TAG))


def test_laplacian_preset_values():
    sys_ = laplacian3()
    assert np.array_equal(
        sys_.A, np.array([[1.01, 0.01, 0.0], [0.01, 1.01, 0.01], [0.0, 0.01, 1.01]])
    )
    assert np.array_equal(sys_.B, np.eye(3))
    w = laplacian3_weights()
    assert np.array_equal(w.Q, np.eye(3))
    assert np.array_equal(w.R, 1e-3 * np.eye(3))
    # marginally unstable open loop
    assert linalg.spectral_radius(sys_.A) > 1.0
