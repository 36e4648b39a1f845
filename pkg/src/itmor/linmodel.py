"""Discrete-time linear Gaussian state-space models.

A model is the recursion

    x[t+1] = A x[t] + B d[t]
    y[t]   = C x[t] + D d[t]

with i.i.d. Gaussian disturbance d[t] ~ N(0, sigma^2 I) and initial belief
x[0] ~ N(x0, Sigma0).  This module defines the model value type, validation
(stability, observability, controllability), block partitioning by a state
subset, and the state-freezing construction in which a subset of states is
replaced by constants while the remaining rows, the noise input and the
output map are kept unchanged.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    LengthMismatch,
    ParseError,
    Unstable,
    ValidationError,
)

__all__ = [
    "LinearGaussianModel",
    "StateSubset",
    "FrozenModel",
    "ValidationReport",
    "Partition",
    "validate",
    "freeze",
    "partition",
    "require_stable",
    "model_from_dict",
    "model_to_dict",
    "load_model_file",
]

RANK_RTOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def _as_matrix(value, name: str) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got ndim={a.ndim}")
    return a


@dataclass(frozen=True)
class LinearGaussianModel:
    """Immutable (A, B, C, D) quadruple with noise scale and initial belief.

    Shapes: A is m x m, B is m x p, C is q x m, D is q x p.  All arrays are
    stored read-only so instances can be shared freely across threads.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    noise_std: float
    x0: np.ndarray
    Sigma0: np.ndarray
    name: str = "model"

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = _as_matrix(self.D, "D")
        m = A.shape[0]
        if A.shape != (m, m):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != m:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {m}")
        if C.shape[1] != m:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {m}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(
                f"D must be {C.shape[0]} x {B.shape[1]}, got {D.shape}"
            )
        if not np.isfinite(self.noise_std) or self.noise_std <= 0:
            raise ValidationError(f"noise_std must be a positive real, got {self.noise_std}")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape != (m,):
            raise DimensionMismatch(f"x0 must have length {m}, got {x0.shape[0]}")
        S0 = _as_matrix(self.Sigma0, "Sigma0")
        if S0.shape != (m, m):
            raise DimensionMismatch(f"Sigma0 must be {m} x {m}, got {S0.shape}")
        if np.max(np.abs(S0 - S0.T)) > 1e-12 * max(1.0, np.max(np.abs(S0))):
            raise ValidationError("Sigma0 must be symmetric")
        S0 = 0.5 * (S0 + S0.T)
        if np.min(np.linalg.eigvalsh(S0)) < -1e-10:
            raise ValidationError("Sigma0 must be positive semidefinite")
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "B", _readonly(B))
        object.__setattr__(self, "C", _readonly(C))
        object.__setattr__(self, "D", _readonly(D))
        object.__setattr__(self, "noise_std", float(self.noise_std))
        object.__setattr__(self, "x0", _readonly(x0))
        object.__setattr__(self, "Sigma0", _readonly(S0))

    @property
    def order(self) -> int:
        """Number of states m."""
        return self.A.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.B.shape[1]

    @property
    def output_dim(self) -> int:
        return self.C.shape[0]

    @classmethod
    def create(cls, A, B, C, D=None, noise_std=1.0, x0=None, Sigma0=None, name="model"):
        """Build a model, filling in the conventional defaults.

        D defaults to the zero matrix, x0 to the zero vector and Sigma0 to
        the identity.  B and C may be given as 1-D sequences (a single noise
        column, a single output row).
        """
        A = _as_matrix(A, "A")
        m = A.shape[0]
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(m, 1) if B.shape[0] == m else B.reshape(1, -1)
        C = np.asarray(C, dtype=float)
        if C.ndim == 1:
            C = C.reshape(1, -1)
        q, p = C.shape[0], B.shape[1]
        if D is None:
            D = np.zeros((q, p))
        else:
            D = np.asarray(D, dtype=float)
            if D.ndim == 0:
                D = np.full((q, p), float(D))
            elif D.ndim == 1:
                D = D.reshape(1, -1)
        if x0 is None:
            x0 = np.zeros(m)
        if Sigma0 is None:
            Sigma0 = np.eye(m)
        return cls(A=A, B=B, C=C, D=D, noise_std=noise_std, x0=x0, Sigma0=Sigma0, name=name)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


@dataclass(frozen=True)
class StateSubset:
    """A sorted, duplicate-free set of state indices.  May be empty."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise IndexOutOfRange(f"negative state index in {idx}")
        if any(b <= a for a, b in itertools.pairwise(idx)):
            raise ValidationError(f"subset indices must be strictly increasing, got {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, *indices: int) -> "StateSubset":
        return cls(tuple(sorted(int(i) for i in set(indices))))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def check_against(self, m: int) -> None:
        if self.indices and self.indices[-1] >= m:
            raise IndexOutOfRange(f"subset {self.indices} out of range for order {m}")

    def complement(self, m: int) -> "StateSubset":
        self.check_against(m)
        return StateSubset(tuple(i for i in range(m) if i not in self.indices))

    def label(self) -> str:
        """Stable textual form, e.g. '0+2'.  Empty subset renders as '-'."""
        return "+".join(str(i) for i in self.indices) if self.indices else "-"


@dataclass(frozen=True)
class FrozenModel:
    """A base model with a subset of states held constant.

    The effective transition matrix keeps every unfrozen row of the base
    model (including its coupling into frozen states) and replaces each
    frozen row i by the i-th standard basis vector, so frozen coordinates
    stay at ``frozen_value`` under noise-free dynamics.  B, C, D and the
    noise scale are unchanged: disturbances still enter the frozen
    coordinates of the covariance bookkeeping.
    """

    base: LinearGaussianModel
    frozen: StateSubset
    frozen_value: np.ndarray
    effective_A: np.ndarray = field(init=False)

    def __post_init__(self):
        self.frozen.check_against(self.base.order)
        fv = np.asarray(self.frozen_value, dtype=float).reshape(-1)
        if fv.shape[0] != len(self.frozen):
            raise LengthMismatch(
                f"frozen_value has {fv.shape[0]} entries for {len(self.frozen)} frozen states"
            )
        A1 = np.array(self.base.A)
        for i in self.frozen:
            A1[i, :] = 0.0
            A1[i, i] = 1.0
        object.__setattr__(self, "frozen_value", _readonly(fv))
        object.__setattr__(self, "effective_A", _readonly(A1))

    @property
    def order(self) -> int:
        return self.base.order

    def initial_mean(self) -> np.ndarray:
        """Base x0 with frozen coordinates replaced by the frozen values."""
        x0 = np.array(self.base.x0)
        for k, i in enumerate(self.frozen):
            x0[i] = self.frozen_value[k]
        return x0

    def as_model(self, name: str | None = None) -> LinearGaussianModel:
        """The frozen system as a plain model (its A has unit eigenvalues)."""
        b = self.base
        return LinearGaussianModel(
            A=self.effective_A, B=b.B, C=b.C, D=b.D, noise_std=b.noise_std,
            x0=self.initial_mean(), Sigma0=b.Sigma0,
            name=name or f"{b.name}/frozen[{self.frozen.label()}]",
        )


@dataclass(frozen=True)
class ValidationReport:
    spectral_radius: float
    is_schur_stable: bool
    observable: bool
    controllable: bool
    messages: tuple[str, ...]


@dataclass(frozen=True)
class Partition:
    """Block views of (A, B, C) induced by a subset and its complement."""

    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray


def _rank(mat: np.ndarray, rtol: float) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def validate(model: LinearGaussianModel, rank_rtol: float = RANK_RTOL) -> ValidationReport:
    """Check stability and the rank conditions for observability/controllability.

    Singular values below ``rank_rtol`` times the largest one count as zero
    when deciding the rank of the m-block observability and controllability
    matrices.
    """
    m = model.order
    rho = model.spectral_radius()
    stable = bool(rho < 1.0)
    obs_blocks = [model.C]
    ctr_blocks = [model.B]
    Ak = np.eye(m)
    for _ in range(m - 1):
        Ak = Ak @ model.A
        obs_blocks.append(model.C @ Ak)
        ctr_blocks.append(Ak @ model.B)
    observable = _rank(np.vstack(obs_blocks), rank_rtol) == m
    controllable = _rank(np.hstack(ctr_blocks), rank_rtol) == m
    messages = []
    if not stable:
        messages.append(f"A is not Schur stable (spectral radius {rho:.6g})")
    if not observable:
        messages.append("(A, C) is not observable")
    if not controllable:
        messages.append("(A, B) is not controllable")
    return ValidationReport(
        spectral_radius=rho,
        is_schur_stable=stable,
        observable=observable,
        controllable=controllable,
        messages=tuple(messages),
    )


def require_stable(model: LinearGaussianModel, what: str = "model") -> None:
    rho = model.spectral_radius()
    if rho >= 1.0:
        raise Unstable(f"{what} must be Schur stable, spectral radius is {rho:.6g}")


def freeze(
    model: LinearGaussianModel,
    subset: StateSubset,
    frozen_value: np.ndarray | None = None,
) -> FrozenModel:
    """Hold the given states constant.

    ``frozen_value`` defaults to the corresponding entries of the model's
    initial mean x0.  Freezing the empty subset returns a frozen model whose
    effective transition matrix equals the base A.
    """
    subset.check_against(model.order)
    if frozen_value is None:
        frozen_value = model.x0[list(subset.indices)]
    return FrozenModel(base=model, frozen=subset, frozen_value=frozen_value)


def partition(model: LinearGaussianModel, subset: StateSubset) -> Partition:
    """Split (A, B, C) into the blocks induced by ``subset`` and its complement."""
    subset.check_against(model.order)
    s = list(subset.indices)
    c = list(subset.complement(model.order).indices)
    A, B, C = model.A, model.B, model.C
    return Partition(
        A11=A[np.ix_(s, s)], A12=A[np.ix_(s, c)],
        A21=A[np.ix_(c, s)], A22=A[np.ix_(c, c)],
        B1=B[s, :], B2=B[c, :],
        C1=C[:, s], C2=C[:, c],
    )


# -- model documents ---------------------------------------------------------

_REQUIRED_KEYS = {"name", "A", "B", "C", "sigma"}
_ALLOWED_KEYS = _REQUIRED_KEYS | {"D", "x0", "Sigma0"}


def model_from_dict(doc: dict) -> LinearGaussianModel:
    """Build a model from a parsed JSON document.

    Required keys: name, A, B, C, sigma.  Optional: D (defaults to the zero
    matrix), x0 (zero vector), Sigma0 (identity).
    """
    if not isinstance(doc, dict):
        raise ParseError(f"model document must be an object, got {type(doc).__name__}")
    unknown = set(doc) - _ALLOWED_KEYS
    if unknown:
        raise ParseError(f"unknown keys in model document: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(doc)
    if missing:
        raise ParseError(f"missing keys in model document: {sorted(missing)}")
    if not isinstance(doc["name"], str):
        raise ParseError("model name must be a string")
    try:
        sigma = float(doc["sigma"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"sigma is not a number: {doc['sigma']!r}") from exc

    def arr(key):
        if key not in doc or doc[key] is None:
            return None
        try:
            return np.asarray(doc[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"key {key!r} is not a numeric array") from exc

    try:
        return LinearGaussianModel.create(
            A=arr("A"), B=arr("B"), C=arr("C"), D=arr("D"),
            noise_std=sigma, x0=arr("x0"), Sigma0=arr("Sigma0"),
            name=doc["name"],
        )
    except ValueError as exc:  # ragged nested lists and similar
        raise ParseError(str(exc)) from exc


def model_to_dict(model: LinearGaussianModel) -> dict:
    return {
        "name": model.name,
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "C": model.C.tolist(),
        "D": model.D.tolist(),
        "sigma": model.noise_std,
        "x0": model.x0.tolist(),
        "Sigma0": model.Sigma0.tolist(),
    }


def load_model_file(path: str | Path) -> LinearGaussianModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read model file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
