"""Experiment suite: a grid of (method x human setting x seed) trials with
aggregated reports and a success-vs-effort scatter dataset.

Cells run independently (trials are pure functions of config+seed), so the
suite parallelizes over a process pool; aggregation order is fixed by the
grid, which keeps report files byte-identical across reruns and job counts.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import ConfigError
from .trial import TrialConfig, run_trial


@dataclass(frozen=True)
class SuiteGrid:
    scenario: str = "pour_package"
    methods: tuple[str, ...] = ("mixed_init",)
    p_tilde: tuple[float, ...] = (0.0, 0.3, 0.7, 1.0)
    moods: tuple[str, ...] = ("positive", "negative")
    trials_per_cell: int = 10
    alpha: float = 10.0
    base_seed: int = 0
    # effort-controlled baseline's human share: a number, or "auto" to use the
    # mean human-steps fraction measured from this grid's mixed_init cells
    recb_p: float | str = 0.5
    q_samples: int = 100

    def __post_init__(self):
        if isinstance(self.recb_p, str) and self.recb_p != "auto":
            raise ConfigError(f"recb_p must be a number or 'auto', got {self.recb_p!r}")
        if self.recb_p == "auto" and "recb" in self.methods:
            if "mixed_init" not in self.methods or self.methods.index(
                "mixed_init"
            ) > self.methods.index("recb"):
                raise ConfigError("recb_p='auto' needs mixed_init listed before recb")

    @classmethod
    def from_file(cls, path: str) -> "SuiteGrid":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read grid file {path}: {exc}") from exc
        return cls(
            scenario=raw.get("scenario", "pour_package"),
            methods=tuple(raw.get("methods", ["mixed_init"])),
            p_tilde=tuple(raw.get("p_tilde", [0.0, 0.3, 0.7, 1.0])),
            moods=tuple(raw.get("moods", ["positive", "negative"])),
            trials_per_cell=int(raw.get("trials_per_cell", 10)),
            alpha=float(raw.get("alpha", 10.0)),
            base_seed=int(raw.get("base_seed", 0)),
            recb_p=raw.get("recb_p", 0.5)
            if raw.get("recb_p") == "auto"
            else float(raw.get("recb_p", 0.5)),
            q_samples=int(raw.get("q_samples", 100)),
        )

    def cells(self) -> list[tuple[str, str, float]]:
        return [
            (method, mood, p)
            for method in self.methods
            for mood in self.moods
            for p in self.p_tilde
        ]

    def configs_for(self, cell, recb_p: float | None = None) -> list[TrialConfig]:
        method, mood, p = cell
        effective_recb = recb_p if recb_p is not None else (
            0.5 if self.recb_p == "auto" else float(self.recb_p)
        )
        return [
            TrialConfig(
                scenario=self.scenario,
                method=method,
                human_p=p,
                mood=mood,
                alpha=self.alpha,
                seed=self.base_seed + i,
                recb_p=effective_recb,
                q_samples=self.q_samples,
            )
            for i in range(self.trials_per_cell)
        ]


@dataclass
class CellResult:
    method: str
    mood: str
    p_tilde: float
    per_trial: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.per_trial)

    def mean(self, key: str) -> float:
        if not self.per_trial:
            return math.nan
        return sum(float(m[key]) for m in self.per_trial) / self.n

    def sd(self, key: str) -> float:
        if self.n < 2:
            return 0.0
        mu = self.mean(key)
        return math.sqrt(sum((float(m[key]) - mu) ** 2 for m in self.per_trial) / (self.n - 1))


def _run_one(config: TrialConfig) -> dict:
    metrics, _ = run_trial(config)
    out = metrics.to_dict()
    out["success"] = 1.0 if metrics.full_success else 0.0
    return out


def run_suite(grid: SuiteGrid, out_dir: str | None = None, jobs: int = 1):
    """Run the grid; returns cell results and optionally writes report files."""
    cells = grid.cells()
    results = []
    mixed_fractions: list[float] = []
    for cell in cells:
        recb_p = None
        if cell[0] == "recb" and grid.recb_p == "auto":
            recb_p = (
                sum(mixed_fractions) / len(mixed_fractions) if mixed_fractions else 0.5
            )
        configs = grid.configs_for(cell, recb_p=recb_p)
        cell_result = CellResult(method=cell[0], mood=cell[1], p_tilde=cell[2])
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_try_run, configs))
        else:
            outcomes = [_try_run(c) for c in configs]
        for outcome in outcomes:
            if isinstance(outcome, str):
                cell_result.errors.append(outcome)
            else:
                cell_result.per_trial.append(outcome)
        if cell[0] == "mixed_init":
            mixed_fractions.extend(
                float(m["human_steps_fraction"]) for m in cell_result.per_trial
            )
        results.append(cell_result)
    if out_dir is not None:
        write_report(grid, results, out_dir)
    return results


def _try_run(config: TrialConfig):
    try:
        return _run_one(config)
    except Exception as exc:  # partial failures recorded; the suite continues
        return f"{config.method}/{config.mood}/{config.human_p}/seed{config.seed}: {exc}"


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def write_report(grid: SuiteGrid, results: list[CellResult], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    report_lines = [
        "method,mood,p_tilde,n,success_rate,success_sd,steps_completed_mean,"
        "human_steps_mean,human_effort_mean,human_effort_sd,help_requests_mean,"
        "initiative_shifts_mean"
    ]
    for r in results:
        report_lines.append(
            ",".join(
                [
                    r.method,
                    r.mood,
                    _fmt(r.p_tilde),
                    str(r.n),
                    _fmt(r.mean("success")),
                    _fmt(r.sd("success")),
                    _fmt(r.mean("steps_completed_fraction")),
                    _fmt(r.mean("human_steps_fraction")),
                    _fmt(r.mean("human_effort_seconds")),
                    _fmt(r.sd("human_effort_seconds")),
                    _fmt(r.mean("help_requests")),
                    _fmt(r.mean("initiative_shifts")),
                ]
            )
        )
    with open(os.path.join(out_dir, "report.csv"), "w") as fh:
        fh.write("\n".join(report_lines) + "\n")

    # one success-vs-effort point per method, averaged over human settings
    scatter_lines = ["method,success_rate,human_effort_seconds"]
    for method in grid.methods:
        rows = [r for r in results if r.method == method and r.per_trial]
        if not rows:
            continue
        success = sum(r.mean("success") for r in rows) / len(rows)
        effort = sum(r.mean("human_effort_seconds") for r in rows) / len(rows)
        scatter_lines.append(f"{method},{_fmt(success)},{_fmt(effort)}")
    with open(os.path.join(out_dir, "scatter.csv"), "w") as fh:
        fh.write("\n".join(scatter_lines) + "\n")

    trial_lines = ["method,mood,p_tilde,trial,success,steps_completed,human_effort_seconds"]
    for r in results:
        for i, m in enumerate(r.per_trial):
            trial_lines.append(
                f"{r.method},{r.mood},{_fmt(r.p_tilde)},{i},{_fmt(m['success'])},"
                f"{_fmt(m['steps_completed_fraction'])},{_fmt(m['human_effort_seconds'])}"
            )
    with open(os.path.join(out_dir, "trials.csv"), "w") as fh:
        fh.write("\n".join(trial_lines) + "\n")

    errors = [e for r in results for e in r.errors]
    if errors:
        with open(os.path.join(out_dir, "errors.txt"), "w") as fh:
            fh.write("\n".join(errors) + "\n")
