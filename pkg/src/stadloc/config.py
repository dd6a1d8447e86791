"""Run configuration: a JSON file plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .eigensolver.scaling import ScalingOptions
from .errors import ConfigError
from .transport import CRITERIA


@dataclass
class RunConfig:
    epsilons: list
    windows: list = field(default_factory=list)      # [[k_center, half_width], ...]
    k0: list = field(default_factory=list)           # window starts, paired with states_per_window
    states_per_window: int = 1000
    run_id: str = "run"
    out: str = "out"
    seed: int = 0
    jobs: int = 1
    grid: list = field(default_factory=lambda: [400, 400])
    A0: float = 0.7
    nbins: int = 35
    stats_window: int = 100
    n_particles: int = 10000
    n_collisions: int | None = None                  # None: extend until saturated
    criterion: str = "expmodel"
    husimi_states: list = field(default_factory=lambda: [0])  # per-window indices saved as grids
    brody_min_spacings: int = 500
    beta_min_samples: int = 200
    bootstrap: int = 200
    solver: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if not isinstance(self.epsilons, list) or not self.epsilons:
            raise ConfigError("epsilons must be a non-empty list")
        for e in self.epsilons:
            if not isinstance(e, (int, float)) or not math.isfinite(e) or e <= 0:
                raise ConfigError(f"invalid epsilon {e!r}; need finite values > 0")
        for w in self.windows:
            if len(w) != 2 or not (w[1] > 0 and w[0] - w[1] > 0):
                raise ConfigError(f"invalid window {w!r}; need [k_center, half_width] with positive bounds")
        if any(k <= 0 for k in self.k0):
            raise ConfigError("k0 values must be positive")
        if self.states_per_window < 2:
            raise ConfigError("states_per_window must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if len(self.grid) != 2 or min(self.grid) < 1:
            raise ConfigError("grid must be [nq, np] with positive entries")
        if not 0 < self.A0 <= 1:
            raise ConfigError("A0 must lie in (0, 1]")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"criterion must be one of {CRITERIA}")
        if self.n_particles < 1000:
            raise ConfigError("n_particles must be >= 1000")
        if not self.run_id or "/" in self.run_id:
            raise ConfigError("run_id must be a plain name")
        known = {f.name for f in fields(ScalingOptions)}
        unknown = set(self.solver) - known
        if unknown:
            raise ConfigError(f"unknown solver options {sorted(unknown)}")
        try:
            self.scaling_options()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def scaling_options(self) -> ScalingOptions:
        return ScalingOptions(**self.solver)

    def snapshot(self) -> dict:
        return asdict(self)

    def digest(self, keys=None) -> str:
        snap = self.snapshot()
        if keys is not None:
            snap = {k: snap[k] for k in keys}
        for k in ("jobs", "out"):
            snap.pop(k, None)  # never affect numerical outputs
        return hashlib.sha256(json.dumps(snap, sort_keys=True).encode()).hexdigest()


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    names = {f.name for f in fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "epsilons" not in data:
        raise ConfigError("config needs 'epsilons'")
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
