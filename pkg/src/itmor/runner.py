"""Command orchestration shared by the CLI and the HTTP service.

Each command maps a validated model plus options to a :class:`Report`:

- ``analyze``  : step-value trajectory for one frozen subset
- ``hankel``   : Hankel singular values
- ``reduce``   : per-candidate transfer trajectories and the reduction ranking
- ``crossing`` : the two frozen-variant trajectories of a decoupled two-state
  model, their crossing step and the analytic bounds
- ``compare``  : side-by-side horizon-n and asymptotic rankings
"""
from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__
from .baltrunc import gramians, hankel_singular_values
from .errors import ValidationError
from .itransfer import rank_reductions
from .klmetrics import (
    DecoupledParams,
    crossing_analysis,
    nstep_kl_decoupled,
    nstep_kl_general,
)
from .linmodel import (
    LinearGaussianModel,
    StateSubset,
    freeze,
    load_model_file,
    validate,
)
from .report import Report, render_csv, render_json

__all__ = [
    "RunConfig",
    "run",
    "analyze_report",
    "hankel_report",
    "reduce_report",
    "crossing_report",
    "compare_report",
]

COMMANDS = ("analyze", "hankel", "reduce", "crossing", "compare")
ALLOWED_FLAGS = {
    "mode", "innovation", "indexing", "format", "jobs", "grid",
    "frozen_value", "timestamp", "tol", "max_iter",
}


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation: command, model file, options.

    ``flags`` carries the named options (mode, innovation, indexing, format,
    jobs, grid, frozen_value, timestamp, tol, max_iter); unknown names are
    rejected.
    """

    command: str
    model_path: Path
    horizon: int = 0
    subset: StateSubset | None = None
    order: int | None = None
    output_path: Path | None = None
    flags: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.horizon < 0:
            raise ValidationError(f"horizon must be >= 0, got {self.horizon}")
        unknown = set(self.flags) - ALLOWED_FLAGS
        if unknown:
            raise ValidationError(f"unknown flags: {sorted(unknown)}")


def _base_metadata(command: str, model: LinearGaussianModel, **echo) -> dict[str, str]:
    meta = {
        "tool": "itmor",
        "version": __version__,
        "command": command,
        "model": model.name,
        "order": str(model.order),
    }
    for key, value in echo.items():
        if value is not None:
            meta[key] = str(value)
    return meta


def _require_stable_truth(model: LinearGaussianModel) -> None:
    report = validate(model)
    if not report.is_schur_stable:
        raise ValidationError(
            f"model {model.name!r} must be Schur stable "
            f"(spectral radius {report.spectral_radius:.6g})"
        )


def analyze_report(
    model: LinearGaussianModel,
    subset: StateSubset,
    horizon: int,
    mode: str = "filter",
    innovation: str = "ddt",
    frozen_value=None,
) -> Report:
    _require_stable_truth(model)
    frozen = freeze(model, subset, frozen_value)
    traj = nstep_kl_general(model, frozen, horizon, mode=mode, innovation=innovation)
    rep = Report(metadata=_base_metadata(
        "analyze", model, frozen=subset.label(), horizon=horizon,
        mode=mode, innovation=innovation,
    ))
    rep.add_table(
        "trajectory", ("step", "value"),
        [(float(k), float(v)) for k, v in enumerate(traj.values)],
    )
    return rep


def hankel_report(model: LinearGaussianModel) -> Report:
    _require_stable_truth(model)
    hsv = hankel_singular_values(gramians(model))
    rep = Report(metadata=_base_metadata("hankel", model))
    rep.add_table(
        "hankel", ("index", "value"),
        [(float(i), float(v)) for i, v in enumerate(hsv.values)],
    )
    return rep


def _ranks(values: list[float]) -> list[int]:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=int)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks.tolist()


def reduce_report(
    model: LinearGaussianModel,
    order: int,
    horizon: int,
    mode: str = "filter",
    innovation: str = "ddt",
    jobs: int = 1,
    grid: list[int] | None = None,
    tol: float = 1e-12,
) -> Report:
    _require_stable_truth(model)
    ranking = rank_reductions(
        model, order, horizon, mode=mode, innovation=innovation, jobs=jobs, tol=tol
    )
    labels = [s.label() for s, _, _ in ranking.candidates]
    rep = Report(metadata=_base_metadata(
        "reduce", model, frozen_order=order, horizon=horizon, mode=mode,
        innovation=innovation, candidates=",".join(labels),
        best_at_horizon=ranking.best_at_horizon.label(),
        best_asymptotic=ranking.best_asymptotic.label(),
    ))
    scored = [
        (float(i), float(traj.values[horizon]), float(asym))
        for i, (_, traj, asym) in enumerate(ranking.candidates)
    ]
    scored.sort(key=lambda row: (row[1], row[0]))  # best at horizon on top
    rep.add_table("ranking", ("candidate", "value_at_horizon", "asymptotic"), scored)
    traj_cols = ["step"] + [f"it[{lab}]" for lab in labels]
    traj_rows = [
        tuple([float(k)] + [float(traj.values[k]) for _, traj, _ in ranking.candidates])
        for k in range(horizon + 1)
    ]
    rep.add_table("trajectories", traj_cols, traj_rows)
    if grid:
        bad = [g for g in grid if not 0 <= g <= horizon]
        if bad:
            raise ValidationError(f"grid steps {bad} outside [0, {horizon}]")
        rows = []
        for g in sorted(grid):
            best = ranking.best_at(g)
            rows.append((float(g), float(labels.index(best.label()))))
        rep.add_table("best_on_grid", ("horizon", "best_candidate"), rows)
    return rep


def crossing_report(
    model: LinearGaussianModel, horizon: int, indexing: str = "direct"
) -> Report:
    _require_stable_truth(model)
    params = DecoupledParams.from_model(model)
    alpha = nstep_kl_decoupled(params, frozen=0, n=horizon, indexing=indexing)
    beta = nstep_kl_decoupled(params, frozen=1, n=horizon, indexing=indexing)
    result = crossing_analysis(alpha, beta, params, indexing=indexing)

    def fmt_opt(v):
        if v is None:
            return "none"
        return "%.17g" % v if isinstance(v, float) else str(v)

    rep = Report(metadata=_base_metadata(
        "crossing", model, horizon=horizon, indexing=indexing,
        crossing_step=fmt_opt(result.crossing_step),
        crossing_time=fmt_opt(result.crossing_time),
        lower_bound="%.17g" % result.lower_bound if not math.isnan(result.lower_bound) else "nan",
        upper_bound="%.17g" % result.upper_bound if not math.isnan(result.upper_bound) else "nan",
        assumption1=str(result.assumption1_holds).lower(),
    ))
    rep.add_table(
        "trajectories", ("step", "alpha", "beta"),
        [
            (float(k), float(alpha.values[k]), float(beta.values[k]))
            for k in range(horizon + 1)
        ],
    )
    return rep


def compare_report(
    model: LinearGaussianModel,
    order: int,
    horizon: int,
    mode: str = "filter",
    innovation: str = "ddt",
    jobs: int = 1,
    tol: float = 1e-12,
) -> Report:
    _require_stable_truth(model)
    ranking = rank_reductions(
        model, order, horizon, mode=mode, innovation=innovation, jobs=jobs, tol=tol
    )
    labels = [s.label() for s, _, _ in ranking.candidates]
    at_h = [float(traj.values[horizon]) for _, traj, _ in ranking.candidates]
    asym = [float(a) for _, _, a in ranking.candidates]
    rank_h, rank_a = _ranks(at_h), _ranks(asym)
    rep = Report(metadata=_base_metadata(
        "compare", model, frozen_order=order, horizon=horizon, mode=mode,
        innovation=innovation, candidates=",".join(labels),
        best_at_horizon=ranking.best_at_horizon.label(),
        best_asymptotic=ranking.best_asymptotic.label(),
    ))
    rep.add_table(
        "comparison",
        ("candidate", "value_at_horizon", "rank_at_horizon", "asymptotic", "rank_asymptotic"),
        [
            (float(i), at_h[i], float(rank_h[i]), asym[i], float(rank_a[i]))
            for i in range(len(labels))
        ],
    )
    return rep


def run(config: RunConfig) -> Report:
    """Execute a command from its config; optionally write the report to disk."""
    flags = dict(config.flags)
    model = load_model_file(config.model_path)
    mode = str(flags.get("mode", "filter"))
    innovation = str(flags.get("innovation", "ddt"))
    indexing = str(flags.get("indexing", "direct"))
    jobs = int(flags.get("jobs", 1))
    grid = flags.get("grid")
    tol = float(flags.get("tol", 1e-12))

    if config.command == "analyze":
        subset = config.subset if config.subset is not None else StateSubset(())
        report = analyze_report(
            model, subset, config.horizon, mode=mode, innovation=innovation,
            frozen_value=flags.get("frozen_value"),
        )
    elif config.command == "hankel":
        report = hankel_report(model)
    elif config.command == "reduce":
        if config.order is None:
            raise ValidationError("reduce needs the number of states to freeze")
        report = reduce_report(
            model, config.order, config.horizon, mode=mode,
            innovation=innovation, jobs=jobs, grid=grid, tol=tol,
        )
    elif config.command == "crossing":
        report = crossing_report(model, config.horizon, indexing=indexing)
    else:
        if config.order is None:
            raise ValidationError("compare needs the number of states to freeze")
        report = compare_report(
            model, config.order, config.horizon, mode=mode,
            innovation=innovation, jobs=jobs, tol=tol,
        )

    if flags.get("timestamp"):
        report.metadata["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    if config.output_path is not None:
        fmt = str(flags.get("format", "csv"))
        text = render_json(report) if fmt == "json" else render_csv(report)
        Path(config.output_path).write_text(text)
    return report
