"""Balanced truncation: gramians, Hankel singular values, balancing, truncation.

The asymptotic baseline for model reduction.  Gramians solve the discrete
Lyapunov pair

    A P A^T + B B^T = P        (controllability)
    A^T Q A + C^T C = Q        (observability)

matching the discrete-time recursions used everywhere else in this package;
the continuous-time pair is available behind ``form="continuous"`` for
comparison.  Hankel singular values are the square roots of the eigenvalues
of P Q and are invariant under state-space similarity transforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .covprop import symmetrize
from .errors import InvalidSubset, NoConvergence, SingularGramian, Unstable
from .linmodel import LinearGaussianModel, StateSubset, require_stable

__all__ = [
    "GramianPair",
    "HankelSpectrum",
    "BalancedModel",
    "gramians",
    "hankel_singular_values",
    "balance",
    "truncate",
]

GRAMIAN_FORMS = ("discrete", "continuous")


@dataclass(frozen=True)
class GramianPair:
    P: np.ndarray  # controllability
    Q: np.ndarray  # observability


@dataclass(frozen=True)
class HankelSpectrum:
    """Nonincreasing, nonnegative singular values, one per state."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise ValueError("Hankel singular values must be nonnegative")
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise ValueError("Hankel singular values must be nonincreasing")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> float:
        return self.values[k]


@dataclass(frozen=True)
class BalancedModel:
    """A model in coordinates where both gramians equal diag(HSVs)."""

    model: LinearGaussianModel
    transform: np.ndarray


def gramians(
    model: LinearGaussianModel, form: str = "discrete", tol: float = 1e-10
) -> GramianPair:
    """Solve the Lyapunov pair and verify the fixed-point residuals."""
    if form not in GRAMIAN_FORMS:
        raise ValueError(f"unknown gramian form {form!r}, expected one of {GRAMIAN_FORMS}")
    A, B, C = model.A, model.B, model.C
    if form == "continuous":
        if np.max(np.linalg.eigvals(A).real) >= 0.0:
            raise Unstable("continuous gramians need all eigenvalue real parts < 0")
        P = sla.solve_continuous_lyapunov(A, -B @ B.T)
        Q = sla.solve_continuous_lyapunov(A.T, -C.T @ C)
        res_p = np.max(np.abs(A @ P + P @ A.T + B @ B.T))
        res_q = np.max(np.abs(A.T @ Q + Q @ A + C.T @ C))
    else:
        require_stable(model)
        P = sla.solve_discrete_lyapunov(A, B @ B.T)
        Q = sla.solve_discrete_lyapunov(A.T, C.T @ C)
        res_p = np.max(np.abs(A @ P @ A.T + B @ B.T - P))
        res_q = np.max(np.abs(A.T @ Q @ A + C.T @ C - Q))
    scale = max(1.0, np.max(np.abs(P)), np.max(np.abs(Q)))
    if max(res_p, res_q) > tol * scale:
        raise NoConvergence(
            f"gramian residuals {res_p:.3e}, {res_q:.3e} exceed tolerance"
        )
    return GramianPair(P=symmetrize(P), Q=symmetrize(Q))


def hankel_singular_values(g: GramianPair) -> HankelSpectrum:
    """sqrt of the eigenvalues of P Q, sorted nonincreasing, clamped at zero."""
    try:
        L = np.linalg.cholesky(g.P)
        w = np.linalg.eigvalsh(L.T @ g.Q @ L)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvals(g.P @ g.Q).real
    w = np.clip(w, 0.0, None)
    return HankelSpectrum(tuple(np.sort(np.sqrt(w))[::-1]))


def balance(model: LinearGaussianModel) -> BalancedModel:
    """Square-root balancing: Cholesky factors of P and Q, SVD of the cross factor.

    The returned transform T satisfies T^-1 P T^-T = T^T Q T = diag(HSVs)
    up to 1e-8, which is re-verified by recomputing the gramians of the
    transformed model.
    """
    g = gramians(model)
    try:
        Lp = np.linalg.cholesky(g.P)
        Lq = np.linalg.cholesky(g.Q)
    except np.linalg.LinAlgError:
        raise SingularGramian("balancing needs positive definite gramians") from None
    U, s, Vt = np.linalg.svd(Lq.T @ Lp)
    if s[-1] <= 0:
        raise SingularGramian("cross factor of the gramians is rank deficient")
    T = Lp @ Vt.T @ np.diag(s**-0.5)
    Tinv = np.linalg.inv(T)
    balanced = LinearGaussianModel(
        A=Tinv @ model.A @ T,
        B=Tinv @ model.B,
        C=model.C @ T,
        D=model.D,
        noise_std=model.noise_std,
        x0=Tinv @ model.x0,
        Sigma0=symmetrize(Tinv @ model.Sigma0 @ Tinv.T),
        name=f"{model.name}/balanced",
    )
    gb = gramians(balanced)
    hsv = np.diag(np.array(hankel_singular_values(g).values))
    err = max(np.max(np.abs(gb.P - hsv)), np.max(np.abs(gb.Q - hsv)))
    if err > 1e-8 * max(1.0, float(hsv[0, 0])):
        raise NoConvergence(f"balanced gramians deviate from diag(HSV) by {err:.3e}")
    return BalancedModel(model=balanced, transform=T)


def truncate(model: LinearGaussianModel, keep: StateSubset) -> LinearGaussianModel:
    """Hard state removal: keep only the given rows/columns of (A, B, C, x0, Sigma0).

    Distinct from freezing: removed states disappear from the model rather
    than being held constant, and the noise scale is unchanged.
    """
    keep.check_against(model.order)
    if not keep.indices:
        raise InvalidSubset("keep must be nonempty")
    idx = list(keep.indices)
    return LinearGaussianModel(
        A=model.A[np.ix_(idx, idx)],
        B=model.B[idx, :],
        C=model.C[:, idx],
        D=model.D,
        noise_std=model.noise_std,
        x0=model.x0[idx],
        Sigma0=model.Sigma0[np.ix_(idx, idx)],
        name=f"{model.name}/keep[{keep.label()}]",
    )
