import numpy as np
import pytest
import scipy.linalg as sla

from itmor import (
    DimensionMismatch,
    LinearGaussianModel,
    NoConvergence,
    SingularCovariance,
    SingularInnovation,
    StateSubset,
    Unstable,
    covariance_trajectory,
    freeze,
    joint_discrepancy_cov,
    kalman_cov_step,
    lyapunov_steady,
    lyapunov_step,
    riccati_steady,
)
from itmor.covprop import (
    kalman_predictive_sequence,
    predictive_discrepancy,
    psd_clamp,
)

from .oracles import brute_conditional_cov, mc_filter_discrepancy


def test_lyapunov_step_scalar():
    out = lyapunov_step(np.array([[1.0]]), np.array([[0.99]]), np.array([[1.0]]), 1.0)
    assert out[0, 0] == pytest.approx(1.9801, abs=1e-14)


def test_lyapunov_step_zero_dynamics():
    B = np.array([[1.0], [2.0]])
    out = lyapunov_step(np.eye(2) * 7.0, np.zeros((2, 2)), B, 1.5)
    np.testing.assert_allclose(out, 1.5**2 * B @ B.T, atol=1e-14)


def test_lyapunov_step_two_state(two_timescale):
    out = lyapunov_step(np.eye(2), two_timescale.A, two_timescale.B, 1.0)
    np.testing.assert_allclose(out, [[1.9801, 1.0], [1.0, 1.64]], atol=1e-14)


def test_lyapunov_step_shape_error():
    with pytest.raises(DimensionMismatch):
        lyapunov_step(np.eye(3), np.eye(2), np.eye(2), 1.0)


def test_lyapunov_steady_scalars():
    s11 = lyapunov_steady(np.array([[0.99]]), np.array([[1.0]]), 1.0)
    # oracle: iterate the recursion to convergence
    s = 1.0
    for _ in range(20000):
        s = 0.99**2 * s + 1.0
    assert s11[0, 0] == pytest.approx(s, rel=1e-12)
    assert s11[0, 0] == pytest.approx(1.0 / (1.0 - 0.99**2), rel=1e-12)
    s22 = lyapunov_steady(np.array([[0.8]]), np.array([[1.0]]), 1.0)
    assert s22[0, 0] == pytest.approx(1.0 / 0.36, rel=1e-12)


def test_lyapunov_steady_memoryless():
    B = np.array([[1.0], [3.0]])
    out = lyapunov_steady(np.zeros((2, 2)), B, 2.0)
    np.testing.assert_allclose(out, 4.0 * B @ B.T, atol=1e-12)


def test_lyapunov_steady_unstable():
    with pytest.raises(Unstable):
        lyapunov_steady(np.eye(2), np.eye(2), 1.0)


def test_lyapunov_steady_iteration_cap():
    with pytest.raises(NoConvergence):
        lyapunov_steady(np.array([[0.999]]), np.array([[1.0]]), 1.0, max_doublings=1)


def test_lyapunov_steady_matches_scipy():
    rng = np.random.default_rng(11)
    for _ in range(5):
        m = rng.integers(2, 5)
        A = rng.standard_normal((m, m))
        A *= 0.9 / max(abs(np.linalg.eigvals(A)))
        B = rng.standard_normal((m, 2))
        ours = lyapunov_steady(A, B, 1.3)
        ref = sla.solve_discrete_lyapunov(A, 1.3**2 * B @ B.T)
        np.testing.assert_allclose(ours, ref, rtol=1e-9, atol=1e-9)


def test_lyapunov_monotone_from_zero(two_timescale):
    A, B = np.array(two_timescale.A), np.array(two_timescale.B)
    target = lyapunov_steady(A, B, 1.0)
    S = np.zeros((2, 2))
    prev = S
    for _ in range(600):
        S = lyapunov_step(S, A, B, 1.0)
        assert np.min(np.linalg.eigvalsh(S - prev)) >= -1e-12
        prev = S
    assert np.max(np.abs(S - target)) < 1e-2


def test_kalman_cov_step_scalar_hand_value():
    m = LinearGaussianModel.create([[0.99]], [[1.0]], [[1.0]], D=[[1.0]], noise_std=1.0)
    P_next, gain = kalman_cov_step(np.array([[1.0]]), m)
    assert P_next[0, 0] == pytest.approx(0.9801 * (1 - 1 / 2) + 1, abs=1e-14)
    assert gain[0, 0] == pytest.approx(0.5, abs=1e-14)


def test_kalman_cov_step_no_measurement_is_lyapunov(two_timescale):
    m = LinearGaussianModel.create(
        two_timescale.A, two_timescale.B, [0.0, 0.0], noise_std=1.0
    )
    P = np.array([[2.0, 0.3], [0.3, 1.0]])
    P_next, gain = kalman_cov_step(P, m)
    np.testing.assert_allclose(
        P_next, lyapunov_step(P, m.A, m.B, 1.0), atol=1e-14
    )
    assert np.all(gain == 0.0)


def test_kalman_dominated_by_lyapunov(two_timescale):
    P = np.eye(2)
    for _ in range(30):
        P_k, _ = kalman_cov_step(P, two_timescale)
        P_l = lyapunov_step(P, two_timescale.A, two_timescale.B, two_timescale.noise_std)
        assert np.min(np.linalg.eigvalsh(P_l - P_k)) >= -1e-10
        P = P_k


def test_kalman_singular_innovation():
    m = LinearGaussianModel.create(
        np.eye(2) * 0.5, np.eye(2), [[1.0, 0.0], [1.0, 0.0]], noise_std=1.0
    )
    with pytest.raises(SingularInnovation):
        kalman_cov_step(np.eye(2), m)


def test_riccati_two_timescale_fixed_point(two_timescale):
    sol = riccati_steady(two_timescale)
    np.testing.assert_allclose(sol.P, np.ones((2, 2)), atol=1e-6)
    P_next, _ = kalman_cov_step(sol.P, two_timescale)
    assert np.max(np.abs(P_next - sol.P)) < 1e-10
    assert sol.residual < 1e-12


def test_riccati_four_state(four_state):
    sol = riccati_steady(four_state)
    P_next, _ = kalman_cov_step(sol.P, four_state)
    assert np.max(np.abs(P_next - sol.P)) < 1e-10
    # independent restart reaches the same fixed point
    shifted = LinearGaussianModel.create(
        four_state.A, four_state.B, four_state.C, noise_std=1.0,
        Sigma0=50.0 * np.eye(4),
    )
    sol2 = riccati_steady(shifted)
    np.testing.assert_allclose(sol.P, sol2.P, atol=1e-8)


def test_riccati_no_measurement_equals_lyapunov(two_timescale):
    m = LinearGaussianModel.create(
        two_timescale.A, two_timescale.B, [0.0, 0.0], noise_std=1.0
    )
    sol = riccati_steady(m)
    ref = lyapunov_steady(m.A, m.B, 1.0)
    np.testing.assert_allclose(sol.P, ref, atol=1e-9)


def test_riccati_divergence_detected():
    m = LinearGaussianModel.create([[1.5]], [[1.0]], [[0.0]], noise_std=1.0)
    with pytest.raises(NoConvergence):
        riccati_steady(m, max_iter=5000)


def test_kalman_matches_joint_gaussian_conditioning():
    A = np.array([[0.7, 0.2], [0.0, 0.5]])
    B = np.array([[1.0, 0.3], [0.2, 0.8]])
    C = np.array([[1.0, -0.4]])
    S0 = np.array([[1.0, 0.1], [0.1, 0.8]])
    # D = 0: no process/measurement correlation, default recursion is exact
    m0 = LinearGaussianModel.create(A, B, C, noise_std=0.9, Sigma0=S0)
    for n in (1, 3, 6):
        P = S0.copy()
        for _ in range(n):
            P, _ = kalman_cov_step(P, m0)
        ref = brute_conditional_cov(A, B, C, np.zeros((1, 2)), 0.9, S0, n)
        np.testing.assert_allclose(P, ref, atol=1e-12)
    # D != 0: the correlated update reproduces the exact conditional covariance
    D = np.array([[0.5, -0.2]])
    m1 = LinearGaussianModel.create(A, B, C, D=D, noise_std=0.9, Sigma0=S0)
    P = S0.copy()
    for k in range(1, 8):
        P, _ = kalman_cov_step(P, m1, correlated=True)
        ref = brute_conditional_cov(A, B, C, D, 0.9, S0, k)
        np.testing.assert_allclose(P, ref, atol=1e-11)


def test_joint_discrepancy_identical_models(two_timescale):
    frozen = freeze(two_timescale, StateSubset(()))
    covs = joint_discrepancy_cov(two_timescale, frozen, 8)
    for M in covs:
        np.testing.assert_array_equal(M, np.zeros((1, 1)))


def test_joint_discrepancy_starts_at_zero(two_timescale):
    frozen = freeze(two_timescale, StateSubset.of(0))
    covs = joint_discrepancy_cov(two_timescale, frozen, 10)
    assert covs[0][0, 0] == 0.0
    vals = [float(M[0, 0]) for M in covs]
    assert all(v >= 0 for v in vals)
    assert all(b > a for a, b in zip(vals[1:], vals[2:]))  # increasing after start


def test_joint_discrepancy_against_monte_carlo(two_timescale):
    frozen = freeze(two_timescale, StateSubset.of(0))
    covs = joint_discrepancy_cov(two_timescale, frozen, 10)
    _, _, mc_cov, mc_se = mc_filter_discrepancy(
        two_timescale, frozen.effective_A, 10, trials=120_000, seed=314
    )
    for k in range(11):
        assert abs(covs[k][0, 0] - mc_cov[k]) <= 3.0 * max(mc_se[k], 1e-12)


def test_propagated_covariances_stay_psd(four_state):
    traj = covariance_trajectory(four_state, 40)
    for M in traj.matrices:
        assert np.min(np.linalg.eigvalsh(M)) >= -1e-10
    disc = predictive_discrepancy(four_state, freeze(four_state, StateSubset.of(1)), 40)
    for k in range(41):
        assert np.min(np.linalg.eigvalsh(disc.diff_cov[k])) >= -1e-10


def test_kalman_predictive_sequence_means(two_timescale):
    states = kalman_predictive_sequence(two_timescale, 5)
    mean = np.array(two_timescale.x0)
    for st in states:
        np.testing.assert_allclose(st.prior_mean, mean, atol=1e-14)
        assert st.gain.shape == (2, 1)
        mean = two_timescale.A @ mean


def test_psd_clamp():
    dusty = np.array([[1.0, 0.0], [0.0, -5e-11]])
    cleaned = psd_clamp(dusty)
    assert np.min(np.linalg.eigvalsh(cleaned)) >= 0.0
    with pytest.raises(SingularCovariance):
        psd_clamp(np.array([[1.0, 0.0], [0.0, -1e-3]]))
