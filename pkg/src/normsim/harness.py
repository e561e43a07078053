"""Experiment grids: cell expansion, seeded trials, aggregation, persistence.

Two experiment families are built in:

- `single_nonauthoritative`: one institution that nobody follows; the
  background community defies it in unison. Grid axes: number of crops x
  number of background agents.
- `multi_institution`: several institutions declaring distinct crops, exactly
  one of them authoritative, with a community of followers. Grid axes: number
  of institutions x number of background followers.

Trials are embarrassingly parallel; workers return plain records and the
parent sorts them by cell coordinates before aggregating and writing files,
so output bytes cannot depend on scheduling. Every float in metrics.csv is
rendered with %.6f and the across-trial std is the population std (ddof=0).
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .agents import build_roster
from .institutions import CROP_NAMES, make_institution, parse_institution
from .oracle import ChatConfig
from .orchard import (
    BACKGROUND_MODES,
    EnvConfig,
    alignment_metric,
    group_welfare,
    render_transcript,
    run_episode,
    steps_to_convergence,
)

EXPERIMENTS = ("single_nonauthoritative", "multi_institution")
FOCAL_KINDS = ("normative", "baseline")

# EnvConfig fields an experiment config may override (cell axes own the rest).
ENV_OVERRIDE_KEYS = (
    "discussion_turns",
    "max_timesteps",
    "eval_window",
    "sanction_cost_received",
    "sanction_cost_sent",
    "harvest_reward",
    "monoculture_bonus",
)

METRICS_HEADER = (
    "experiment,focal_kind,num_crops,num_background,num_institutions,trial_count,"
    "alignment_inst_mean,alignment_inst_std,alignment_comm_mean,alignment_comm_std,"
    "steps_to_convergence_mean,group_welfare_mean,status"
)


class ConfigError(ValueError):
    """A config file failed validation; `errors` lists every violation found."""

    def __init__(self, errors):
        self.errors = tuple(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    """A full grid definition. Axis fields not used by the experiment are ignored."""

    experiment: str
    focal_kinds: tuple[str, ...] = ("normative",)
    num_crops_grid: tuple[int, ...] = (2, 3, 4, 5)
    num_background_grid: tuple[int, ...] = (1, 2, 3, 4, 5)
    num_institutions_grid: tuple[int, ...] = (2, 3, 4, 5)
    num_background_followers_grid: tuple[int, ...] = (1, 2, 3, 4, 5)
    num_crops: int = 5  # crop count for multi_institution cells
    trials: int = 3
    seed_base: int = 42
    beta: float = 0.5
    sanction_threshold: float = 0.6
    observe_others: bool = True
    env_overrides: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        kinds = tuple(self.focal_kinds)
        if not kinds or any(k not in FOCAL_KINDS for k in kinds) or len(set(kinds)) != len(kinds):
            raise ValueError(f"focal_kinds must be distinct members of {FOCAL_KINDS}")
        for label in ("num_crops_grid", "num_background_grid", "num_institutions_grid",
                      "num_background_followers_grid"):
            axis = tuple(getattr(self, label))
            if not axis or any(not isinstance(v, int) or v < 1 for v in axis):
                raise ValueError(f"{label} must be a non-empty list of positive integers")
            object.__setattr__(self, label, axis)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = [k for k, _ in self.env_overrides if k not in ENV_OVERRIDE_KEYS]
        if bad:
            raise ValueError(f"env overrides not permitted: {', '.join(bad)}")
        object.__setattr__(self, "focal_kinds", kinds)
        object.__setattr__(self, "env_overrides", tuple(self.env_overrides))

    def grid(self) -> tuple[tuple[int, int], ...]:
        """Cell coordinates in declaration order."""
        if self.experiment == "single_nonauthoritative":
            return tuple(product(self.num_crops_grid, self.num_background_grid))
        return tuple(product(self.num_institutions_grid, self.num_background_followers_grid))


def trial_seed(seed_base: int, experiment: str, coords: tuple[int, int], trial: int) -> int:
    """64-bit episode seed from the run's seed and the trial's coordinates."""
    key = (EXPERIMENTS.index(experiment) + 1, coords[0], coords[1], trial)
    ss = np.random.SeedSequence(entropy=seed_base, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def cell_infeasible(cfg: ExperimentConfig, coords: tuple[int, int]) -> str | None:
    """A reason string when the cell cannot be built, else None."""
    if cfg.experiment == "multi_institution":
        k = coords[0]
        if k > cfg.num_crops:
            return f"{k} institutions need {k} distinct crops but only {cfg.num_crops} exist"
    return None


def cell_env(cfg: ExperimentConfig, coords: tuple[int, int], seed: int) -> EnvConfig:
    """The EnvConfig for one grid cell."""
    overrides = dict(cfg.env_overrides)
    if cfg.experiment == "single_nonauthoritative":
        num_crops, num_background = coords
        institutions = (make_institution(0, crop=0, authoritative=False),)
        mode = "defy_institution"
    else:
        k, num_background = coords
        num_crops = cfg.num_crops
        institutions = tuple(
            make_institution(i, crop=i, authoritative=(i == 0)) for i in range(k)
        )
        mode = "follow_authoritative"
    return EnvConfig(
        institutions=institutions,
        num_background=num_background,
        background_mode=mode,
        num_crops=num_crops,
        crop_names=CROP_NAMES[:num_crops],
        seed=seed,
        **overrides,
    )


@dataclass(frozen=True)
class TrialResult:
    """One episode's metrics, plus its transcript for the parent to persist."""

    experiment: str
    focal_kind: str
    coords: tuple[int, int]
    trial: int
    status: str  # "ok" | "skipped: ..." | "failed: ..."
    alignment_inst: float | None = None
    alignment_comm: float | None = None
    steps: int | None = None
    welfare: float | None = None
    transcript: str = ""


def _reference_institution(env: EnvConfig) -> int:
    authoritative = [inst.id for inst in env.institutions if inst.authoritative]
    return authoritative[0] if authoritative else env.institutions[0].id


def run_cell(
    cfg: ExperimentConfig, coords: tuple[int, int], focal_kind: str, trial: int
) -> TrialResult:
    """Run one seeded trial of one grid cell."""
    reason = cell_infeasible(cfg, coords)
    if reason is not None:
        return TrialResult(cfg.experiment, focal_kind, coords, trial, f"skipped: {reason}")
    seed = trial_seed(cfg.seed_base, cfg.experiment, coords, trial)
    try:
        env = cell_env(cfg, coords, seed)
        agents = build_roster(
            env,
            focal_kind,
            beta=cfg.beta,
            sanction_threshold=cfg.sanction_threshold,
            observe_others=cfg.observe_others,
        )
        history = run_episode(env, agents)
        return TrialResult(
            experiment=cfg.experiment,
            focal_kind=focal_kind,
            coords=coords,
            trial=trial,
            status="ok",
            alignment_inst=alignment_metric(history, env, _reference_institution(env)),
            alignment_comm=alignment_metric(history, env, "community_modal"),
            steps=steps_to_convergence(history, env),
            welfare=group_welfare(history),
            transcript=render_transcript(history, env),
        )
    except Exception as exc:  # noqa: BLE001 - a failed trial must not sink the run
        return TrialResult(
            cfg.experiment, focal_kind, coords, trial, f"failed: {type(exc).__name__}: {exc}"
        )


@dataclass(frozen=True)
class MetricsRow:
    """One grid cell aggregated over its trials."""

    experiment: str
    focal_kind: str
    num_crops: int
    num_background: int
    num_institutions: int
    trial_count: int
    alignment_inst_mean: float | None
    alignment_inst_std: float | None
    alignment_comm_mean: float | None
    alignment_comm_std: float | None
    steps_to_convergence_mean: float | None
    group_welfare_mean: float | None
    status: str

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "focal_kind": self.focal_kind,
            "num_crops": self.num_crops,
            "num_background": self.num_background,
            "num_institutions": self.num_institutions,
            "trial_count": self.trial_count,
            "alignment_inst_mean": self.alignment_inst_mean,
            "alignment_inst_std": self.alignment_inst_std,
            "alignment_comm_mean": self.alignment_comm_mean,
            "alignment_comm_std": self.alignment_comm_std,
            "steps_to_convergence_mean": self.steps_to_convergence_mean,
            "group_welfare_mean": self.group_welfare_mean,
            "status": self.status,
        }

    def to_csv_row(self) -> list[str]:
        def fmt(v) -> str:
            return "" if v is None else "%.6f" % v

        return [
            self.experiment,
            self.focal_kind,
            str(self.num_crops),
            str(self.num_background),
            str(self.num_institutions),
            str(self.trial_count),
            fmt(self.alignment_inst_mean),
            fmt(self.alignment_inst_std),
            fmt(self.alignment_comm_mean),
            fmt(self.alignment_comm_std),
            fmt(self.steps_to_convergence_mean),
            fmt(self.group_welfare_mean),
            self.status,
        ]


def _cell_shape(cfg: ExperimentConfig, coords: tuple[int, int]) -> tuple[int, int, int]:
    """(num_crops, num_background, num_institutions) for the metrics row."""
    if cfg.experiment == "single_nonauthoritative":
        return coords[0], coords[1], 1
    return cfg.num_crops, coords[1], coords[0]


def _aggregate(cfg: ExperimentConfig, focal_kind: str, coords: tuple[int, int],
               results: list[TrialResult]) -> MetricsRow:
    num_crops, num_background, num_institutions = _cell_shape(cfg, coords)
    bad = next((r for r in results if r.status != "ok"), None)
    if bad is not None:
        return MetricsRow(
            cfg.experiment, focal_kind, num_crops, num_background, num_institutions,
            0 if bad.status.startswith("skipped") else len(results),
            None, None, None, None, None, None, bad.status,
        )
    inst = np.array([r.alignment_inst for r in results])
    comm = np.array([r.alignment_comm for r in results])
    steps = np.array([r.steps for r in results], dtype=float)
    welfare = np.array([r.welfare for r in results])
    return MetricsRow(
        experiment=cfg.experiment,
        focal_kind=focal_kind,
        num_crops=num_crops,
        num_background=num_background,
        num_institutions=num_institutions,
        trial_count=len(results),
        alignment_inst_mean=float(inst.mean()),
        alignment_inst_std=float(inst.std()),  # population std over the trials
        alignment_comm_mean=float(comm.mean()),
        alignment_comm_std=float(comm.std()),
        steps_to_convergence_mean=float(steps.mean()),
        group_welfare_mean=float(welfare.mean()),
        status="ok",
    )


def transcript_filename(focal_kind: str, coords: tuple[int, int], trial: int) -> str:
    return f"ep_{focal_kind}-{coords[0]}-{coords[1]}_{trial}.txt"


def write_metrics_csv(rows: list[MetricsRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER.split(","))
        for row in rows:
            writer.writerow(row.to_csv_row())


def write_metrics_json(cfg: ExperimentConfig, rows: list[MetricsRow], path) -> None:
    payload = {
        "experiment": cfg.experiment,
        "seed_base": cfg.seed_base,
        "trials": cfg.trials,
        "rows": [row.to_dict() for row in rows],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(
    cfg: ExperimentConfig, out_dir, jobs: int | None = None
) -> list[MetricsRow]:
    """Expand the grid, run every (cell, focal kind, trial), aggregate, persist.

    Writes metrics.csv, metrics.json, and one transcript per completed trial
    into `out_dir`. Failed trials mark their row `failed: ...`; the caller
    decides the process exit code from the statuses.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    tasks = [
        (kind, coords, trial)
        for kind in cfg.focal_kinds
        for coords in grid
        for trial in range(cfg.trials)
    ]
    if jobs is None:
        jobs = os.cpu_count() or 1
    results: dict[tuple[str, tuple[int, int], int], TrialResult] = {}
    if jobs <= 1:
        for kind, coords, trial in tasks:
            results[(kind, coords, trial)] = run_cell(cfg, coords, kind, trial)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                (kind, coords, trial): pool.submit(run_cell, cfg, coords, kind, trial)
                for kind, coords, trial in tasks
            }
            for key, fut in futures.items():
                results[key] = fut.result()

    rows: list[MetricsRow] = []
    for kind in cfg.focal_kinds:
        for coords in grid:
            cell = [results[(kind, coords, t)] for t in range(cfg.trials)]
            rows.append(_aggregate(cfg, kind, coords, cell))
            for r in cell:
                if r.status == "ok":
                    name = transcript_filename(kind, coords, r.trial)
                    (out / name).write_text(r.transcript)
    write_metrics_csv(rows, out / "metrics.csv")
    write_metrics_json(cfg, rows, out / "metrics.json")
    return rows


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def _collect_int(obj: dict, key: str, errors: list[str], default, minimum=None, prefix=""):
    value = obj.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        errors.append(f"{prefix}{key} must be an integer")
        return default
    if minimum is not None and value < minimum:
        errors.append(f"{prefix}{key} must be >= {minimum}")
        return default
    return value


def _collect_number(obj: dict, key: str, errors: list[str], default, minimum=None, prefix=""):
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{prefix}{key} must be a number")
        return default
    if minimum is not None and value < minimum:
        errors.append(f"{prefix}{key} must be >= {minimum}")
        return default
    return float(value)


_ENV_KEYS = (
    "institutions", "num_background", "background_mode", "num_crops",
    "discussion_turns", "max_timesteps", "eval_window", "sanction_cost_received",
    "sanction_cost_sent", "harvest_reward", "monoculture_bonus", "seed",
)


def parse_env_config(obj, errors: list[str], prefix: str = "") -> EnvConfig | None:
    """Validate an environment section, appending every violation to `errors`."""
    if not isinstance(obj, dict):
        errors.append(f"{prefix or 'env'} must be an object")
        return None
    for key in obj:
        if key not in _ENV_KEYS:
            errors.append(f"unknown key {prefix}{key}")
    num_crops = _collect_int(obj, "num_crops", errors, 5, prefix=prefix)
    if not 2 <= num_crops <= len(CROP_NAMES):
        errors.append(f"{prefix}num_crops must be in [2, {len(CROP_NAMES)}]")
        num_crops = 5
    crop_names = CROP_NAMES[:num_crops]

    institutions = []
    raw_institutions = obj.get("institutions", [])
    if not isinstance(raw_institutions, list):
        errors.append(f"{prefix}institutions must be an array")
    else:
        for idx, entry in enumerate(raw_institutions):
            try:
                institutions.append(parse_institution(entry, idx, crop_names))
            except ValueError as exc:
                errors.append(f"{prefix}{exc}")

    background_mode = obj.get("background_mode", "follow_authoritative")
    if background_mode not in BACKGROUND_MODES:
        errors.append(f"{prefix}background_mode must be one of {', '.join(BACKGROUND_MODES)}")
    max_timesteps = _collect_int(obj, "max_timesteps", errors, 16, minimum=1, prefix=prefix)
    eval_window = _collect_int(obj, "eval_window", errors, 8, minimum=1, prefix=prefix)
    if eval_window > max_timesteps:
        errors.append(f"{prefix}eval_window must be <= max_timesteps")
    kwargs = {
        "num_background": _collect_int(obj, "num_background", errors, 4, minimum=0, prefix=prefix),
        "background_mode": background_mode,
        "discussion_turns": _collect_int(obj, "discussion_turns", errors, 1, minimum=0, prefix=prefix),
        "max_timesteps": max_timesteps,
        "eval_window": eval_window,
        "sanction_cost_received": _collect_number(obj, "sanction_cost_received", errors, 0.25, 0, prefix=prefix),
        "sanction_cost_sent": _collect_number(obj, "sanction_cost_sent", errors, 0.05, 0, prefix=prefix),
        "harvest_reward": _collect_number(obj, "harvest_reward", errors, 1.0, prefix=prefix),
        "monoculture_bonus": _collect_number(obj, "monoculture_bonus", errors, 0.5, 0, prefix=prefix),
        "seed": _collect_int(obj, "seed", errors, 0, minimum=0, prefix=prefix),
    }
    if errors:
        return None
    try:
        return EnvConfig(
            institutions=tuple(institutions),
            num_crops=num_crops,
            crop_names=crop_names,
            **kwargs,
        )
    except ValueError as exc:
        errors.append(f"{prefix}{exc}")
        return None


@dataclass(frozen=True)
class SimConfig:
    """One simulate run: the environment plus the focal agent and oracle choice."""

    env: EnvConfig
    focal_kind: str = "normative"
    beta: float = 0.5
    sanction_threshold: float = 0.6
    observe_others: bool = True
    oracle_kind: str = "scripted"
    chat: ChatConfig | None = None


_SIM_KEYS = ("env", "focal", "beta", "sanction_threshold", "observe_others", "oracle")
_ORACLE_KEYS = ("kind", "base_url", "model", "temperature", "timeout_secs")


def parse_sim_config(obj) -> SimConfig:
    """Validate a simulate config, raising ConfigError listing every violation."""
    errors: list[str] = []
    if not isinstance(obj, dict):
        raise ConfigError(["config must be a JSON object"])
    for key in obj:
        if key not in _SIM_KEYS:
            errors.append(f"unknown key {key}")
    if "env" not in obj:
        errors.append("env section is required")
    env = parse_env_config(obj.get("env", {}), errors, prefix="env.")

    focal = obj.get("focal", "normative")
    if focal not in FOCAL_KINDS:
        errors.append(f"focal must be one of {', '.join(FOCAL_KINDS)}")
    beta = _collect_number(obj, "beta", errors, 0.5)
    if not 0.0 < beta < 1.0:
        errors.append("beta must be in (0, 1)")
    threshold = _collect_number(obj, "sanction_threshold", errors, 0.6)
    if not 0.0 < threshold <= 1.0:
        errors.append("sanction_threshold must be in (0, 1]")
    observe_others = obj.get("observe_others", True)
    if not isinstance(observe_others, bool):
        errors.append("observe_others must be a boolean")

    oracle_kind, chat = "scripted", None
    oracle_obj = obj.get("oracle", {"kind": "scripted"})
    if not isinstance(oracle_obj, dict):
        errors.append("oracle must be an object")
    else:
        for key in oracle_obj:
            if key not in _ORACLE_KEYS:
                errors.append(f"unknown key oracle.{key}")
        oracle_kind = oracle_obj.get("kind", "scripted")
        if oracle_kind not in ("scripted", "chat"):
            errors.append("oracle.kind must be 'scripted' or 'chat'")
        elif oracle_kind == "chat":
            base_url = oracle_obj.get("base_url")
            model = oracle_obj.get("model")
            if not isinstance(base_url, str) or not base_url:
                errors.append("oracle.base_url is required for the chat oracle")
            if not isinstance(model, str) or not model:
                errors.append("oracle.model is required for the chat oracle")
            temperature = _collect_number(oracle_obj, "temperature", errors, 0.0)
            timeout = _collect_number(oracle_obj, "timeout_secs", errors, 60.0, minimum=0)
            if not errors:
                chat = ChatConfig(
                    base_url=base_url, model=model,
                    temperature=temperature, timeout_secs=timeout,
                )
    if errors or env is None:
        raise ConfigError(errors or ["invalid env section"])
    return SimConfig(
        env=env,
        focal_kind=focal,
        beta=beta,
        sanction_threshold=threshold,
        observe_others=observe_others,
        oracle_kind=oracle_kind,
        chat=chat,
    )


_EXPERIMENT_KEYS = (
    "experiment", "focal", "num_crops_grid", "num_background_grid",
    "num_institutions_grid", "num_background_followers_grid", "num_crops",
    "trials", "seed_base", "beta", "sanction_threshold", "observe_others", "env",
)


def parse_experiment_config(obj) -> ExperimentConfig:
    """Validate an experiment config, raising ConfigError listing every violation."""
    errors: list[str] = []
    if not isinstance(obj, dict):
        raise ConfigError(["config must be a JSON object"])
    for key in obj:
        if key not in _EXPERIMENT_KEYS:
            errors.append(f"unknown key {key}")
    experiment = obj.get("experiment")
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment must be one of {', '.join(EXPERIMENTS)}")

    focal = obj.get("focal", "normative")
    kinds = (focal,) if isinstance(focal, str) else tuple(focal) if isinstance(focal, list) else ()
    if not kinds or any(k not in FOCAL_KINDS for k in kinds) or len(set(kinds)) != len(kinds):
        errors.append(f"focal must name distinct kinds from: {', '.join(FOCAL_KINDS)}")

    def axis(key: str, default: tuple[int, ...]) -> tuple[int, ...]:
        value = obj.get(key, list(default))
        if (
            not isinstance(value, list)
            or not value
            or any(not isinstance(v, int) or isinstance(v, bool) or v < 1 for v in value)
        ):
            errors.append(f"{key} must be a non-empty array of positive integers")
            return default
        return tuple(value)

    grids = {
        "num_crops_grid": axis("num_crops_grid", (2, 3, 4, 5)),
        "num_background_grid": axis("num_background_grid", (1, 2, 3, 4, 5)),
        "num_institutions_grid": axis("num_institutions_grid", (2, 3, 4, 5)),
        "num_background_followers_grid": axis("num_background_followers_grid", (1, 2, 3, 4, 5)),
    }
    num_crops = _collect_int(obj, "num_crops", errors, 5)
    if not 2 <= num_crops <= len(CROP_NAMES):
        errors.append(f"num_crops must be in [2, {len(CROP_NAMES)}]")
        num_crops = 5
    trials = _collect_int(obj, "trials", errors, 3, minimum=1)
    seed_base = _collect_int(obj, "seed_base", errors, 42, minimum=0)
    beta = _collect_number(obj, "beta", errors, 0.5)
    if not 0.0 < beta < 1.0:
        errors.append("beta must be in (0, 1)")
    threshold = _collect_number(obj, "sanction_threshold", errors, 0.6)
    if not 0.0 < threshold <= 1.0:
        errors.append("sanction_threshold must be in (0, 1]")
    observe_others = obj.get("observe_others", True)
    if not isinstance(observe_others, bool):
        errors.append("observe_others must be a boolean")

    overrides: list[tuple[str, float]] = []
    env_obj = obj.get("env", {})
    if not isinstance(env_obj, dict):
        errors.append("env must be an object of override values")
    else:
        for key, value in env_obj.items():
            if key not in ENV_OVERRIDE_KEYS:
                errors.append(f"env override not permitted: {key}")
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                errors.append(f"env.{key} must be a number")
            else:
                overrides.append((key, value))
    if errors:
        raise ConfigError(errors)
    try:
        return ExperimentConfig(
            experiment=experiment,
            focal_kinds=kinds,
            num_crops=num_crops,
            trials=trials,
            seed_base=seed_base,
            beta=beta,
            sanction_threshold=threshold,
            observe_others=observe_others,
            env_overrides=tuple(overrides),
            **grids,
        )
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc


# ---------------------------------------------------------------------------
# Metrics files back in: the report view
# ---------------------------------------------------------------------------

_ROW_KEYS = tuple(METRICS_HEADER.split(","))


def load_metrics(path) -> list[dict]:
    """Rows from a metrics.json or metrics.csv file; schema mismatches are errors."""
    p = Path(path)
    if p.suffix == ".json":
        payload = json.loads(p.read_text())
        rows = payload.get("rows") if isinstance(payload, dict) else None
        if not isinstance(rows, list):
            raise ConfigError([f"{p}: not a metrics.json file (no rows array)"])
        for row in rows:
            if not isinstance(row, dict) or set(row) != set(_ROW_KEYS):
                raise ConfigError([f"{p}: row schema does not match {METRICS_HEADER}"])
        return rows
    with open(p, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != _ROW_KEYS:
            raise ConfigError([f"{p}: header does not match {METRICS_HEADER}"])
        rows = []
        for raw in reader:
            row: dict = dict(raw)
            for key in ("num_crops", "num_background", "num_institutions", "trial_count"):
                row[key] = int(row[key])
            for key in ("alignment_inst_mean", "alignment_inst_std", "alignment_comm_mean",
                        "alignment_comm_std", "steps_to_convergence_mean", "group_welfare_mean"):
                row[key] = float(row[key]) if row[key] else None
            rows.append(row)
        return rows


COMPARISON_HEADER = (
    "experiment,num_crops,num_background,num_institutions,"
    "normative_alignment_inst,baseline_alignment_inst,"
    "normative_alignment_comm,baseline_alignment_comm,"
    "normative_welfare,baseline_welfare"
)


def build_comparison(rows: list[dict]) -> list[dict]:
    """Fold per-kind rows into one normative-vs-baseline row per cell."""
    cells: dict[tuple, dict] = {}
    for row in rows:
        key = (row["experiment"], row["num_crops"], row["num_background"],
               row["num_institutions"])
        cell = cells.setdefault(key, {
            "experiment": key[0], "num_crops": key[1], "num_background": key[2],
            "num_institutions": key[3],
        })
        kind = row["focal_kind"]
        cell[f"{kind}_alignment_inst"] = row["alignment_inst_mean"]
        cell[f"{kind}_alignment_comm"] = row["alignment_comm_mean"]
        cell[f"{kind}_welfare"] = row["group_welfare_mean"]
    ordered = sorted(cells.values(), key=lambda c: (
        c["experiment"], c["num_crops"], c["num_institutions"], c["num_background"],
    ))
    for cell in ordered:
        for key in COMPARISON_HEADER.split(",")[4:]:
            cell.setdefault(key, None)
    return ordered


def comparison_table(cells: list[dict]) -> str:
    """The comparison as an aligned text table."""

    def fmt(value) -> str:
        if value is None:
            return ""
        return "%.6f" % value if isinstance(value, float) else str(value)

    columns = COMPARISON_HEADER.split(",")
    table = [columns]
    for cell in cells:
        table.append([fmt(cell[c]) for c in columns])
    widths = [max(len(row[i]) for row in table) for i in range(len(columns))]
    lines = ["  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip()
             for row in table]
    return "\n".join(lines)
