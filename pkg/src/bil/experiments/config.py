"""Run configuration: schema validation and per-command defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from ..errors import ConfigurationError
from ..leray import SolverConfig

COMMANDS = ("certify", "decay", "inflation", "solve", "endtoend")

_GRID_DEFAULTS = {
    "certify": (3, 64, 1.0),
    "solve": (3, 64, 1.0),
    "decay": (4, 32, 1.0),
    "inflation": (4, 32, 1.0),
    "endtoend": (4, 32, 1.0),
}


def load_schema() -> dict:
    text = resources.files("bil.experiments").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class GridSpec:
    dim: int
    res: int
    period: float = 1.0


@dataclass(frozen=True)
class ScheduleSpec:
    q: float = 1.0
    eps: float = 0.1
    sizes: tuple = (1, 2, 3)
    stride: int = 4
    gap: int = 2
    min_sweep: int = 3
    eps_sweep: tuple = (0.4, 0.2, 0.1)
    frame_res: int = 32


@dataclass(frozen=True)
class SourceSpec:
    kind: str = "random"
    path: str | None = None
    guard_fraction: float = 0.25
    band: tuple | None = None
    cubic_check: bool = False
    halvings: int = 4


@dataclass(frozen=True)
class RunConfig:
    command: str
    grid: GridSpec
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    besov_q: tuple = (2.0,)
    solver: SolverConfig = field(default_factory=SolverConfig)
    source: SourceSpec = field(default_factory=SourceSpec)
    sabotage: tuple = ()
    seed: int = 0
    out: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["schedule"]["sizes"] = list(self.schedule.sizes)
        d["schedule"]["eps_sweep"] = list(self.schedule.eps_sweep)
        return d


def parse_config(data: dict) -> RunConfig:
    """Validate ``data`` against the shipped schema and fill command defaults."""
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"invalid config at {where}: {exc.message}") from None
    cmd = data["command"]
    gd = _GRID_DEFAULTS[cmd]
    g = data.get("grid", {})
    grid = GridSpec(g.get("dim", gd[0]), g.get("res", gd[1]), float(g.get("period", gd[2])))
    if grid.res & (grid.res - 1):
        raise ConfigurationError("grid.res must be a power of two")
    s = data.get("schedule", {})
    sched = ScheduleSpec(
        q=float(s.get("q", 1.0)),
        eps=float(s.get("eps", 0.1)),
        sizes=tuple(s.get("sizes", (1, 2, 3))),
        stride=int(s.get("stride", 4)),
        gap=int(s.get("gap", 2)),
        min_sweep=int(s.get("min_sweep", 3)),
        eps_sweep=tuple(float(e) for e in s.get("eps_sweep", (0.4, 0.2, 0.1))),
        frame_res=int(s.get("frame_res", 32)),
    )
    if list(sched.sizes) != sorted(set(sched.sizes)):
        raise ConfigurationError("schedule.sizes must be strictly increasing")
    sv = data.get("solver", {})
    solver = SolverConfig(**sv)
    src = data.get("source", {})
    source = SourceSpec(
        kind=src.get("kind", "random"),
        path=src.get("path"),
        guard_fraction=float(src.get("guard_fraction", 0.25)),
        band=tuple(src["band"]) if "band" in src else None,
        cubic_check=bool(src.get("cubic_check", False)),
        halvings=int(src.get("halvings", 4)),
    )
    if source.kind == "file" and not source.path:
        raise ConfigurationError("source.kind = file needs source.path")
    bq = tuple(float(q) for q in data.get("besov", {}).get("q", (2.0,)))
    return RunConfig(command=cmd, grid=grid, schedule=sched, besov_q=bq, solver=solver, source=source,
                     sabotage=tuple(data.get("sabotage", ())), seed=int(data.get("seed", 0)),
                     out=data.get("out"))


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    return parse_config(data)
