"""Information transfer from state subsets to outputs or to other states.

The transfer from a state subset to the output is realized as the n-step
comparison value between the model and its subset-frozen variant, so it
inherits the two computation modes of :func:`itmor.klmetrics.nstep_kl_general`.
The transfer between disjoint state blocks conditions on the full state
history instead of the output history: at each step it is the expected KL
between the one-step conditional densities of the target block under the
true and the source-frozen dynamics, which reduces to a quadratic form in
the second moment of the source deviation from its frozen value.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSize, InvalidSubset, SingularTargetNoise, ValidationError
from .klmetrics import KlTrajectory, asymptotic_kl_rate, nstep_kl_general
from .linmodel import LinearGaussianModel, StateSubset, freeze

__all__ = [
    "ItTrajectory",
    "ReductionRanking",
    "it_state_to_output",
    "it_state_to_state",
    "enumerate_subsets",
    "rank_reductions",
]


@dataclass(frozen=True)
class ItTrajectory:
    """Transfer values from ``source`` to ``target`` (None means the output)."""

    source: StateSubset
    target: StateSubset | None
    values: KlTrajectory


def it_state_to_output(
    model: LinearGaussianModel,
    subset: StateSubset,
    n: int,
    mode: str = "filter",
    innovation: str = "ddt",
    frozen_value: np.ndarray | None = None,
) -> ItTrajectory:
    """Transfer from ``subset`` to the output over steps 0..n.

    Identical, by definition, to the n-step comparison value between the
    model and its subset-frozen variant; the frozen value defaults to the
    matching entries of x0.
    """
    subset.check_against(model.order)
    if len(subset) >= model.order:
        raise InvalidSubset("cannot freeze every state; the subset must be proper")
    frozen = freeze(model, subset, frozen_value)
    traj = nstep_kl_general(model, frozen, n, mode=mode, innovation=innovation)
    return ItTrajectory(source=subset, target=None, values=traj)


def it_state_to_state(
    model: LinearGaussianModel,
    source: StateSubset,
    target: StateSubset,
    n: int,
    frozen_value: np.ndarray | None = None,
) -> ItTrajectory:
    """Transfer from ``source`` to ``target`` over steps 0..n.

    Entry k (k >= 1) is

        1/2 tr( (sigma^2 B_t B_t^T)^-1  A_ts M[k-1] A_ts^T )

    where A_ts couples source into target, B_t is the target block of B and
    M[j] = E[(x_s[j] - frozen)(x_s[j] - frozen)^T] under the true dynamics.
    Entry 0 is zero: before any transition the two conditionals coincide.
    """
    source.check_against(model.order)
    target.check_against(model.order)
    if not source.indices or not target.indices:
        raise InvalidSubset("source and target must be nonempty")
    if set(source.indices) & set(target.indices):
        raise InvalidSubset("source and target must be disjoint")
    if n < 0:
        raise ValidationError(f"horizon must be >= 0, got {n}")
    s = list(source.indices)
    t = list(target.indices)
    if frozen_value is None:
        frozen_value = model.x0[s]
    frozen_value = np.asarray(frozen_value, dtype=float).reshape(-1)
    if frozen_value.shape[0] != len(s):
        raise ValidationError(
            f"frozen_value has {frozen_value.shape[0]} entries for {len(s)} source states"
        )
    s2 = model.noise_std**2
    Bt = model.B[t, :]
    noise = s2 * Bt @ Bt.T
    try:
        Ln = np.linalg.cholesky(noise)
    except np.linalg.LinAlgError:
        raise SingularTargetNoise(
            "target-block noise covariance sigma^2 B_t B_t^T is singular"
        ) from None
    A_ts = model.A[np.ix_(t, s)]

    out = np.zeros(n + 1)
    mu = np.array(model.x0)
    Sig = np.array(model.Sigma0)
    for k in range(1, n + 1):
        dev = mu[s] - frozen_value
        M = Sig[np.ix_(s, s)] + np.outer(dev, dev)
        quad = A_ts @ M @ A_ts.T
        out[k] = 0.5 * float(np.trace(np.linalg.solve(Ln @ Ln.T, quad)))
        mu = model.A @ mu
        Sig = model.A @ Sig @ model.A.T + s2 * model.B @ model.B.T
    return ItTrajectory(source=source, target=target, values=KlTrajectory.from_values(out))


def enumerate_subsets(m: int, k: int) -> list[StateSubset]:
    """All C(m, k) subsets of {0..m-1} in lexicographic order."""
    if not 0 < k < m:
        raise InvalidSize(f"need 0 < k < m, got k={k}, m={m}")
    return [StateSubset(c) for c in itertools.combinations(range(m), k)]


@dataclass(frozen=True)
class ReductionRanking:
    """Transfer trajectories and asymptotes for every size-k freeze candidate."""

    candidates: tuple[tuple[StateSubset, ItTrajectory, float], ...]
    horizon: int
    best_at_horizon: StateSubset
    best_asymptotic: StateSubset

    def best_at(self, step: int) -> StateSubset:
        """Candidate with the smallest transfer at ``step`` (ties: first in order)."""
        vals = [traj.values[step] for _, traj, _ in self.candidates]
        return self.candidates[int(np.argmin(vals))][0]


def rank_reductions(
    model: LinearGaussianModel,
    k: int,
    horizon: int,
    mode: str = "filter",
    innovation: str = "ddt",
    jobs: int = 1,
    tol: float = 1e-12,
) -> ReductionRanking:
    """Evaluate every size-k freeze candidate over the horizon and rank them.

    Candidates are scored independently (optionally in a thread pool) and
    merged in lexicographic subset order regardless of completion order, so
    argmin tie-breaking is deterministic.  ``tol`` is the settling tolerance
    of the asymptotic values.
    """
    subsets = enumerate_subsets(model.order, k)

    def score(subset: StateSubset) -> tuple[StateSubset, ItTrajectory, float]:
        traj = it_state_to_output(model, subset, horizon, mode=mode, innovation=innovation)
        asym = asymptotic_kl_rate(
            model, freeze(model, subset), mode=mode, innovation=innovation, tol=tol
        )
        return subset, traj, asym

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            candidates = tuple(pool.map(score, subsets))
    else:
        candidates = tuple(score(s) for s in subsets)
    at_h = [traj.values[horizon] for _, traj, _ in candidates]
    asym = [a for _, _, a in candidates]
    return ReductionRanking(
        candidates=candidates,
        horizon=horizon,
        best_at_horizon=candidates[int(np.argmin(at_h))][0],
        best_asymptotic=candidates[int(np.argmin(asym))][0],
    )
