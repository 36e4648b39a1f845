"""Covariance propagation for linear Gaussian models.

Open-loop state covariances follow the discrete Lyapunov recursion

    Sigma[t+1] = A Sigma[t] A^T + sigma^2 B B^T

and one-step-ahead (a priori) estimation-error covariances follow the
Kalman recursion

    P[t+1] = A (P[t] - P[t] C^T (C P[t] C^T + R)^-1 C P[t]) A^T + sigma^2 B B^T

whose fixed point is the steady-state Riccati solution.  The innovation
noise R is sigma^2 D D^T by default; ``innovation="bbt"`` selects the
alternative sigma^2 C B B^T C^T form instead.  The module also propagates
the joint second moments of (true state, truth-filter mean, frozen-filter
mean) under a shared output stream, which yields the mean and covariance of
the one-step output-prediction discrepancy between two filters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NoConvergence,
    SingularCovariance,
    SingularInnovation,
    Unstable,
)
from .linmodel import FrozenModel, LinearGaussianModel

__all__ = [
    "CovTrajectory",
    "FilterState",
    "RiccatiSolution",
    "PredictiveDiscrepancy",
    "DiscrepancyPropagator",
    "symmetrize",
    "psd_clamp",
    "lyapunov_step",
    "lyapunov_steady",
    "covariance_trajectory",
    "kalman_cov_step",
    "kalman_predictive_sequence",
    "riccati_steady",
    "predictive_discrepancy",
    "joint_discrepancy_cov",
]

PSD_TOL = 1e-10

INNOVATION_MODES = ("ddt", "bbt")


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def psd_clamp(M: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Symmetrize and clamp eigenvalue dust in [-tol, 0) to zero.

    Eigenvalues below -tol are treated as genuine errors.
    """
    M = symmetrize(np.asarray(M, dtype=float))
    w, V = np.linalg.eigh(M)
    if w[0] < -tol:
        raise SingularCovariance(
            f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})"
        )
    w = np.clip(w, 0.0, None)
    return symmetrize(V @ (w[:, None] * V.T))


@dataclass(frozen=True)
class CovTrajectory:
    """An ordered sequence of symmetric PSD covariance matrices."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        cleaned = []
        for M in self.matrices:
            M = np.asarray(M, dtype=float)
            if np.max(np.abs(M - M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
                raise SingularCovariance("covariance entry is not symmetric")
            cleaned.append(psd_clamp(M))
        object.__setattr__(self, "matrices", tuple(cleaned))

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.matrices[k]


@dataclass(frozen=True)
class FilterState:
    """One step of the a priori Kalman recursion: x-hat-minus, P-minus, gain."""

    prior_mean: np.ndarray
    prior_cov: np.ndarray
    gain: np.ndarray


@dataclass(frozen=True)
class RiccatiSolution:
    P: np.ndarray
    residual: float
    iterations: int


def innovation_cov(model: LinearGaussianModel, mode: str = "ddt") -> np.ndarray:
    """The measurement-noise term R entering the innovation covariance."""
    if mode not in INNOVATION_MODES:
        raise ValueError(f"unknown innovation mode {mode!r}, expected one of {INNOVATION_MODES}")
    s2 = model.noise_std**2
    if mode == "ddt":
        return s2 * model.D @ model.D.T
    return s2 * model.C @ model.B @ model.B.T @ model.C.T


def lyapunov_step(Sigma: np.ndarray, A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    """One step of Sigma' = A Sigma A^T + sigma^2 B B^T."""
    Sigma = np.asarray(Sigma, dtype=float)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    m = A.shape[0]
    if A.shape != (m, m) or Sigma.shape != (m, m) or B.shape[0] != m:
        raise DimensionMismatch(
            f"incompatible shapes A{A.shape}, Sigma{Sigma.shape}, B{B.shape}"
        )
    return symmetrize(A @ Sigma @ A.T + sigma**2 * B @ B.T)


def lyapunov_steady(
    A: np.ndarray,
    B: np.ndarray,
    sigma: float,
    tol: float = 1e-10,
    max_doublings: int = 200,
) -> np.ndarray:
    """Fixed point of the Lyapunov recursion, by doubling.

    Accumulates Sigma[2^k] = Sigma[2^(k-1)] + M Sigma[2^(k-1)] M^T with
    M = A^(2^(k-1)), which converges quadratically for Schur-stable A.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho >= 1.0:
        raise Unstable(f"Lyapunov fixed point needs spectral radius < 1, got {rho:.6g}")
    S = sigma**2 * B @ B.T
    M = A.copy()
    for _ in range(max_doublings):
        S_next = symmetrize(S + M @ S @ M.T)
        delta = np.max(np.abs(S_next - S))
        S = S_next
        M = M @ M
        if delta <= tol * max(1.0, np.max(np.abs(S))):
            break
    else:
        raise NoConvergence(f"Lyapunov doubling did not converge in {max_doublings} steps")
    residual = np.max(np.abs(lyapunov_step(S, A, B, sigma) - S))
    if not residual < max(tol, 1e-12 * max(1.0, np.max(np.abs(S)))) * 10:
        raise NoConvergence(f"Lyapunov residual {residual:.3e} above tolerance")
    return S


def covariance_trajectory(model: LinearGaussianModel, n: int) -> CovTrajectory:
    """Open-loop state covariances Sigma[0..n] starting from Sigma0."""
    out = [np.array(model.Sigma0)]
    for _ in range(n):
        out.append(lyapunov_step(out[-1], model.A, model.B, model.noise_std))
    return CovTrajectory(tuple(out))


def _gain(P: np.ndarray, C: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Kalman gain P C^T (C P C^T + R)^-1, with a zero-gain fall-through
    when the output map contributes nothing."""
    S = C @ P @ C.T + R
    PCt = P @ C.T
    if np.all(C == 0.0):
        return np.zeros_like(PCt)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        if np.max(np.abs(PCt)) == 0.0:
            return np.zeros_like(PCt)
        raise SingularInnovation(
            "innovation covariance C P C^T + R is singular"
        ) from None
    return np.linalg.solve(L @ L.T, PCt.T).T


def kalman_cov_step(
    P: np.ndarray,
    model: LinearGaussianModel,
    innovation: str = "ddt",
    correlated: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """One a priori covariance update; returns (P_next, gain).

    With ``correlated=True`` the cross-covariance sigma^2 B D^T between
    process and measurement noise (the same disturbance drives both) enters
    exactly; the returned gain is then the one-step predictor gain L in
    x'[t+1] = A x'[t] + L (y[t] - C x'[t]).  By default the cross term is
    ignored and the gain is the filter gain K = P C^T (C P C^T + R)^-1.
    """
    P = symmetrize(np.asarray(P, dtype=float))
    m = model.order
    if P.shape != (m, m):
        raise DimensionMismatch(f"P must be {m} x {m}, got {P.shape}")
    A, B, C = model.A, model.B, model.C
    s2 = model.noise_std**2
    R = innovation_cov(model, innovation)
    Qn = s2 * B @ B.T
    if correlated:
        S = C @ P @ C.T + R
        num = A @ P @ C.T + s2 * B @ model.D.T
        if np.max(np.abs(num)) == 0.0:
            return symmetrize(A @ P @ A.T + Qn), np.zeros_like(num)
        try:
            L = np.linalg.solve(S.T, num.T).T
        except np.linalg.LinAlgError:
            raise SingularInnovation("innovation covariance is singular") from None
        P_next = symmetrize(A @ P @ A.T + Qn - L @ num.T)
        return P_next, L
    K = _gain(P, C, R)
    P_next = symmetrize(A @ (P - K @ C @ P) @ A.T + Qn)
    return P_next, K


def kalman_predictive_sequence(
    model: LinearGaussianModel, n: int, innovation: str = "ddt"
) -> list[FilterState]:
    """FilterStates for t = 0..n.

    The prior means are the data-free expectations A^t x0 (feeding the
    expected output back through the gain reproduces the open-loop mean).
    """
    states = []
    P = np.array(model.Sigma0)
    mean = np.array(model.x0)
    for _ in range(n + 1):
        P_next, K = kalman_cov_step(P, model, innovation=innovation)
        states.append(FilterState(prior_mean=mean, prior_cov=psd_clamp(P), gain=K))
        mean = model.A @ mean
        P = P_next
    return states


def riccati_steady(
    model: LinearGaussianModel,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    innovation: str = "ddt",
) -> RiccatiSolution:
    """Steady-state a priori covariance, by fixed-point iteration from Sigma0.

    The iteration converges for Schur-stable models and, more generally,
    whenever every non-contracting mode of A is visible through C
    (detectability); otherwise it diverges and NoConvergence is raised.
    """
    P = np.array(model.Sigma0)
    defect = np.inf
    # divergence is detected explicitly, so let the intermediate overflow pass
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            P_next, _ = kalman_cov_step(P, model, innovation=innovation)
            defect = float(np.max(np.abs(P_next - P)))
            P = P_next
            if not np.isfinite(defect):
                raise NoConvergence("Riccati iteration diverged")
            if defect < tol:
                return RiccatiSolution(P=psd_clamp(P), residual=defect, iterations=it)
    raise NoConvergence(
        f"Riccati iteration did not reach tolerance {tol:g} in {max_iter} steps "
        f"(last defect {defect:.3e})"
    )


@dataclass(frozen=True)
class PredictiveDiscrepancy:
    """Per-step second moments of the two filters' one-step output predictions.

    Entry t compares the truth filter's predictive density of y[t] with the
    frozen-model filter's, both conditioned on the same output history
    y[0..t-1] generated by the truth model.
    """

    s1: np.ndarray         # (n+1, q, q) truth predictive covariance
    s2: np.ndarray         # (n+1, q, q) frozen-model predictive covariance
    mean_diff: np.ndarray  # (n+1, q)    E[y-hat - z-hat]
    diff_cov: np.ndarray   # (n+1, q, q) Cov(y-hat - z-hat)


class DiscrepancyPropagator:
    """Stepwise propagation of the joint moments of (x, truth-filter mean,
    frozen-filter mean) under a shared output stream.

    The gain sequences are data independent, so the stacked vector is linear
    Gaussian and its moments propagate in closed form.  Note the frozen
    model's own covariance recursion need not converge (freezing k states
    leaves k unit modes and a single output can pin only one of them); the
    output-projected quantities produced here stay bounded regardless, which
    is why asymptotics are taken over this stepper's values rather than from
    a frozen-model Riccati solution.
    """

    def __init__(
        self,
        truth: LinearGaussianModel,
        approx: FrozenModel,
        innovation: str = "ddt",
    ):
        if approx.base.order != truth.order:
            raise DimensionMismatch("truth and frozen model must have the same order")
        if not (np.array_equal(approx.base.C, truth.C) and np.array_equal(approx.base.D, truth.D)):
            raise DimensionMismatch("truth and frozen model must share C and D")
        self.truth = truth
        self.frozen_model = approx.as_model()
        self.innovation = innovation
        self.A0 = np.array(truth.A)
        self.A1 = np.array(approx.effective_A)
        m = truth.order
        self.R = innovation_cov(truth, innovation)
        self.P = np.array(truth.Sigma0)
        self.Qc = np.array(truth.Sigma0)
        self.mu_x = np.array(truth.x0)
        self.mu_h = np.array(truth.x0)
        self.mu_w = approx.initial_mean()
        self.Xi = np.zeros((3 * m, 3 * m))
        self.Xi[:m, :m] = truth.Sigma0

    def current(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(S1, S2, mean_diff, diff_cov) of the one-step predictions now."""
        C = self.truth.C
        m = self.truth.order
        Xi = self.Xi
        Dh = Xi[m:2*m, m:2*m] - Xi[m:2*m, 2*m:] - Xi[2*m:, m:2*m] + Xi[2*m:, 2*m:]
        return (
            symmetrize(C @ self.P @ C.T + self.R),
            symmetrize(C @ self.Qc @ C.T + self.R),
            C @ (self.mu_h - self.mu_w),
            symmetrize(C @ Dh @ C.T),
        )

    def advance(self) -> None:
        truth = self.truth
        m = truth.order
        A0, A1 = self.A0, self.A1
        B, C, D = truth.B, truth.C, truth.D
        s2n = truth.noise_std**2
        P_next, K0 = kalman_cov_step(self.P, truth, innovation=self.innovation)
        Qc_next, K1 = kalman_cov_step(self.Qc, self.frozen_model, innovation=self.innovation)
        I = np.eye(m)
        F = np.zeros((3 * m, 3 * m))
        F[:m, :m] = A0
        F[m:2*m, :m] = A0 @ K0 @ C
        F[m:2*m, m:2*m] = A0 @ (I - K0 @ C)
        F[2*m:, :m] = A1 @ K1 @ C
        F[2*m:, 2*m:] = A1 @ (I - K1 @ C)
        G = np.zeros((3 * m, truth.noise_dim))
        G[:m] = B
        G[m:2*m] = A0 @ K0 @ D
        G[2*m:] = A1 @ K1 @ D
        self.Xi = symmetrize(F @ self.Xi @ F.T + s2n * G @ G.T)
        Ey = C @ self.mu_x
        self.mu_h = A0 @ (I - K0 @ C) @ self.mu_h + A0 @ K0 @ Ey
        self.mu_w = A1 @ (I - K1 @ C) @ self.mu_w + A1 @ K1 @ Ey
        self.mu_x = A0 @ self.mu_x
        self.P, self.Qc = P_next, Qc_next


def predictive_discrepancy(
    truth: LinearGaussianModel,
    approx: FrozenModel,
    n: int,
    innovation: str = "ddt",
) -> PredictiveDiscrepancy:
    """Joint filter-prediction moments for steps 0..n (see DiscrepancyPropagator)."""
    q = truth.output_dim
    prop = DiscrepancyPropagator(truth, approx, innovation=innovation)
    s1_out = np.empty((n + 1, q, q))
    s2_out = np.empty((n + 1, q, q))
    md_out = np.empty((n + 1, q))
    dc_out = np.empty((n + 1, q, q))
    for k in range(n + 1):
        s1_out[k], s2_out[k], md_out[k], dc_out[k] = prop.current()
        if k < n:
            prop.advance()
    return PredictiveDiscrepancy(s1=s1_out, s2=s2_out, mean_diff=md_out, diff_cov=dc_out)


def joint_discrepancy_cov(
    truth: LinearGaussianModel,
    approx: FrozenModel,
    n: int,
    innovation: str = "ddt",
) -> list[np.ndarray]:
    """Covariance of (y-hat[t] - z-hat[t]) for t = 0..n.

    Entry t is the covariance, over output histories of the truth model, of
    the difference between the two filters' one-step output predictions.
    """
    disc = predictive_discrepancy(truth, approx, n, innovation=innovation)
    return [psd_clamp(disc.diff_cov[k]) for k in range(n + 1)]
