"""Experiment configs, idle-time and timing-grid sweeps, and CSV persistence."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .noise import PRESETS, NoisePreset, NoiseModel, get_preset
from .pauli import get_code
from .qec import QED_METHODS, CycleResult, run_qec_adaptive, run_qec_canonical, run_qed, run_raw

QEC_METHODS = ("canonical", "adaptive")
MODES = ("qed", "qec")
ROW_FIELDS = ("code", "method", "preset", "idle_us", "readout_time_ns", "gate_time_ns", "logical_error_rate",
              "fidelity", "avg_readout_rounds", "avg_readout_count", "success_prob", "branch_count")
GAP_FIELD = "fidelity_gap"
THREADS_ENV = "QECGSM_THREADS"

# upper end of the default idle grid per preset; unknown presets use the first entry
IDLE_SPANS_US = {"sycamore": 30.0, "ibm_brisbane": 200.0, "projective": 1000.0}
DEFAULT_IDLE_POINTS = 10
DEFAULT_READOUT_GRID_NS = (50.0, 660.0, 1500.0, 2750.0, 4000.0)
DEFAULT_GATE_GRID_NS = (10.0, 34.0, 150.0, 350.0, 600.0)


def default_idle_grid(preset_name: str, points: int = DEFAULT_IDLE_POINTS) -> list[float]:
    span = IDLE_SPANS_US.get(preset_name, IDLE_SPANS_US["sycamore"])
    return [float(x) for x in np.linspace(0.0, span, points)]


@dataclass
class ExperimentConfig:
    code: str
    methods: list[str]
    preset: str | dict = "sycamore"
    idle_us: list[float] | None = None
    readout_time_ns: list[float] | None = None
    gate_time_ns: list[float] | None = None
    mode: str = "qed"
    perfect_control: bool = False
    noiseless: bool = False
    raw_reference: bool = False
    output: str | None = None

    def __post_init__(self):
        get_code(self.code)
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        known = QED_METHODS if self.mode == "qed" else QEC_METHODS
        if not self.methods:
            raise ValueError("method list is empty")
        self.methods = [m.lower() for m in self.methods]
        for m in self.methods:
            if m not in known:
                raise ValueError(f"unknown {self.mode} method {m!r}; choose from {', '.join(known)}")
        self.preset_obj()
        if self.idle_us is None:
            self.idle_us = default_idle_grid(self.preset_obj().name)
        for name in ("idle_us", "readout_time_ns", "gate_time_ns"):
            grid = getattr(self, name)
            if grid is not None:
                if len(grid) == 0:
                    raise ValueError(f"grid {name!r} is empty")
                if any(x < 0 for x in grid):
                    raise ValueError(f"grid {name!r} has negative entries")
                setattr(self, name, [float(x) for x in grid])

    def preset_obj(self) -> NoisePreset:
        if isinstance(self.preset, dict):
            return NoisePreset.from_dict(self.preset)
        return get_preset(self.preset)

    @property
    def preset_label(self) -> str:
        name = self.preset_obj().name
        if self.noiseless:
            return name + ":noiseless"
        return name + (":perfect_control" if self.perfect_control else "")

    def model(self, readout_time_ns: float | None = None, gate_time_ns: float | None = None) -> NoiseModel:
        model = NoiseModel.from_preset(self.preset_obj(), self.perfect_control, self.noiseless)
        if readout_time_ns is None and gate_time_ns is None:
            return model
        return model.with_times(readout_time_ns, gate_time_ns)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    for key in ("code", "methods"):
        if key not in data:
            raise ValueError(f"config is missing required key {key!r}")
    return ExperimentConfig(**data)


def read_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


@dataclass
class ResultTable:
    rows: list[dict] = field(default_factory=list)
    extra_fields: tuple[str, ...] = ()

    @property
    def fields(self) -> tuple[str, ...]:
        return ROW_FIELDS + self.extra_fields

    def select(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def column(self, name: str, **match) -> list:
        return [r[name] for r in self.select(**match)]

    def __len__(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# cell evaluation


@dataclass(frozen=True)
class _Cell:
    config: ExperimentConfig
    method: str
    idle_us: float
    readout_time_ns: float | None = None
    gate_time_ns: float | None = None


def _evaluate_cell(cell: _Cell) -> dict:
    cfg = cell.config
    code = get_code(cfg.code)
    model = cfg.model(cell.readout_time_ns, cell.gate_time_ns)
    if cell.method == "raw":
        res = run_raw(code.n_logical, model, cell.idle_us)
    elif cfg.mode == "qed":
        res = run_qed(code, cell.method, model, cell.idle_us)
    elif cell.method == "canonical":
        res = run_qec_canonical(code, model, cell.idle_us)
    else:
        res = run_qec_adaptive(code, model, cell.idle_us)
    return _row(code.name, cell.method, cfg.preset_label, cell.idle_us, model, res)


def _row(code: str, method: str, preset: str, idle_us: float, model: NoiseModel, res: CycleResult) -> dict:
    return {
        "code": code, "method": method, "preset": preset, "idle_us": idle_us,
        "readout_time_ns": model.preset.readout_time_ns, "gate_time_ns": model.preset.gate_time_2q_ns,
        "logical_error_rate": res.logical_error_rate, "fidelity": res.fidelity,
        "avg_readout_rounds": res.avg_readout_rounds, "avg_readout_count": res.avg_readout_count,
        "success_prob": res.postselect_success_prob, "branch_count": res.branch_count,
    }


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def _run_cells(cells: list[_Cell], workers: int | None = None) -> list[dict]:
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(cells) <= 1:
        return [_evaluate_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        return list(pool.map(_evaluate_cell, cells))


def _methods(config: ExperimentConfig) -> list[str]:
    return list(config.methods) + (["raw"] if config.raw_reference else [])


def run_idle_sweep(config: ExperimentConfig, workers: int | None = None) -> ResultTable:
    """One row per (idle point, method) at the preset's own timings, rows ordered by idle then method."""
    cells = [_Cell(config, m, t) for t in config.idle_us for m in _methods(config)]
    return ResultTable(_run_cells(cells, workers))


def run_time_grid_sweep(config: ExperimentConfig, workers: int | None = None) -> ResultTable:
    """Rebuild the model for every (readout time, gate time) cell and compare the methods.

    Each row carries ``fidelity_gap``: the fidelity of the "gsm" (or "adaptive")
    row of its cell minus that of the "sm" (or "canonical") row.
    """
    readout = config.readout_time_ns or list(DEFAULT_READOUT_GRID_NS)
    gate = config.gate_time_ns or list(DEFAULT_GATE_GRID_NS)
    idle_points = config.idle_us if config.idle_us is not None else [0.0]
    cells = [_Cell(config, m, t, r, g) for r in readout for g in gate for t in idle_points for m in _methods(config)]
    rows = _run_cells(cells, workers)
    hi, lo = ("gsm", "sm") if config.mode == "qed" else ("adaptive", "canonical")
    by_cell: dict[tuple, dict[str, float]] = {}
    for row in rows:
        key = (row["readout_time_ns"], row["gate_time_ns"], row["idle_us"])
        by_cell.setdefault(key, {})[row["method"]] = row["fidelity"]
    for row in rows:
        fids = by_cell[(row["readout_time_ns"], row["gate_time_ns"], row["idle_us"])]
        row[GAP_FIELD] = fids[hi] - fids[lo] if hi in fids and lo in fids else float("nan")
    return ResultTable(rows, (GAP_FIELD,))


# ---------------------------------------------------------------------------
# persistence


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def table_to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.fields)
    for row in table.rows:
        writer.writerow([_fmt(row[f]) for f in table.fields])
    return buf.getvalue()


def atomic_write(path: str | Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_csv(table: ResultTable, path: str | Path) -> None:
    atomic_write(path, table_to_csv(table))


_TEXT_FIELDS = {"code", "method", "preset"}


def read_csv(path: str | Path) -> ResultTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[:len(ROW_FIELDS)]) != ROW_FIELDS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for values in reader:
            row: dict = {}
            for name, text in zip(header, values):
                if name in _TEXT_FIELDS:
                    row[name] = text
                elif name == "branch_count":
                    row[name] = int(text)
                else:
                    row[name] = float(text)
            rows.append(row)
    return ResultTable(rows, tuple(header[len(ROW_FIELDS):]))


def run_config(config: ExperimentConfig, workers: int | None = None) -> ResultTable:
    """Timing-grid sweep when either timing grid is set, idle sweep otherwise."""
    if config.readout_time_ns is not None or config.gate_time_ns is not None:
        return run_time_grid_sweep(config, workers)
    return run_idle_sweep(config, workers)


def available_presets() -> list[str]:
    return list(PRESETS)
