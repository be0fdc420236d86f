"""Run configuration: a versioned YAML document with per-dimension defaults.

Example::

    schema_version: 1
    backend: torus          # or mixture
    dimension: 2
    seed: 7
    trials: 100
    grid: {n: 256}
    density: {bandwidth: 6, amplitude: 0.8, decay: 1.0}
    delta_list: [0.0, 0.5]
    t_list: [0.05, 0.1, 0.5, 1.0]
    q_list: [1.0, 2.0, 2.894]
    tolerances: {id: 1.0e-8, ibp: 1.0e-10}
    mixture:                # optional fixed mixture; random ones otherwise
      components:
        - {weight: 1.0, mean: [0.0, 0.0], variance: 1.0}
    extremal: {objectives: [quartic_over_lap], starts: 20, budget: 200}
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError
from .heatflow import delta_to_q, q_to_delta

SCHEMA_VERSION = 1

DEFAULT_N = {1: 1024, 2: 256, 3: 64}
# (bandwidth, amplitude, decay) of the random exp(trig) torus densities
DEFAULT_DENSITY = {1: (8, 1.0, 1.0), 2: (6, 0.8, 1.0), 3: (2, 0.3, 2.0)}
DEFAULT_Q = {1: [1.0, 1.5, 2.0, 2.5, 3.0], 2: [1.0, 1.5, 2.0, 2.894], 3: [1.0, 1.5, 2.0, 2.894]}
DEFAULT_T = [round(x, 12) for x in np.linspace(0.05, 1.0, 10)]

TORUS_TOLERANCES = {
    "id": 1e-8, "ibp": 1e-10, "bochner": 1e-9, "one_d": 1e-8,
    "decomposition": 1e-9, "margin": 1e-8, "concavity": 1e-8,
}
MIXTURE_TOLERANCES = {**TORUS_TOLERANCES, "id": 1e-7, "ibp": 1e-7, "one_d": 1e-7,
                      "bochner": 1e-7}

_KNOWN = {
    "schema_version", "backend", "dimension", "seed", "trials", "grid", "density",
    "mixture", "delta_list", "q_list", "t_list", "tolerances", "output_dir", "extremal",
    "order_check",
}


@dataclass
class ExtremalConfig:
    objectives: list = field(default_factory=lambda: ["quartic_over_lap", "cross_over_lap"])
    bandwidth: int | None = None
    n: int | None = None
    starts: int = 20
    budget: int = 200
    amplitude: float = 0.5
    refine: bool = False
    delta: float = 0.0


@dataclass
class RunConfig:
    backend: str = "torus"
    dimension: int = 1
    seed: int = 0
    trials: int = 10
    n: int | None = None
    length: float = 2 * math.pi
    bandwidth: int | None = None
    amplitude: float | None = None
    decay: float | None = None
    mixture: list | None = None
    mixture_components: int | None = None
    delta_list: list = field(default_factory=lambda: [0.0])
    q_list: list | None = None
    t_list: list = field(default_factory=lambda: list(DEFAULT_T))
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "runs/latest"
    order_check: bool = True
    extremal: ExtremalConfig = field(default_factory=ExtremalConfig)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.backend not in ("torus", "mixture"):
            raise ConfigError(f"backend must be torus or mixture, got {self.backend!r}")
        if self.dimension not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.n is not None and (self.n < 8 or self.n % 2):
            raise ConfigError("grid n must be even and >= 8")
        if not self.t_list or min(self.t_list) <= 0:
            raise ConfigError("t_list must be non-empty and positive")
        for dl in self.delta_list:
            if not dl > -1:
                raise ConfigError(f"delta must exceed -1, got {dl}")
        if self.q_list is not None:
            for q in self.q_list:
                if not q > 0:
                    raise ConfigError(f"q must be positive, got {q}")
        unknown = set(self.tolerances) - set(TORUS_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")

    # resolved values -------------------------------------------------------
    @property
    def grid_n(self) -> int:
        return self.n or DEFAULT_N[self.dimension]

    @property
    def density_params(self) -> tuple[int, float, float]:
        K, a, dec = DEFAULT_DENSITY[self.dimension]
        return (self.bandwidth or K, a if self.amplitude is None else self.amplitude,
                dec if self.decay is None else self.decay)

    @property
    def qs(self) -> list[float]:
        return list(self.q_list) if self.q_list is not None else list(DEFAULT_Q[self.dimension])

    @property
    def tol(self) -> dict:
        base = TORUS_TOLERANCES if self.backend == "torus" else MIXTURE_TOLERANCES
        return {**base, **self.tolerances}

    def to_dict(self) -> dict:
        return asdict(self)


def _consistent_lists(raw: dict) -> None:
    """If both ``q_list`` and ``delta_list`` are given they must pair up."""
    q, d = raw.get("q_list"), raw.get("delta_list")
    if q is None or d is None:
        return
    if len(q) != len(d):
        raise ConfigError("q_list and delta_list have different lengths")
    for qi, di in zip(q, d):
        if qi == 1 and di == 1:
            continue
        if not math.isclose(q_to_delta(qi), di, rel_tol=1e-12, abs_tol=1e-12):
            raise ConfigError(f"q={qi} and delta={di} violate q = 2/(1+delta)")


def from_dict(raw: dict[str, Any]) -> RunConfig:
    raw = copy.deepcopy(raw or {})
    unknown = set(raw) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    _consistent_lists(raw)
    kw: dict[str, Any] = {}
    for key in ("backend", "dimension", "seed", "trials", "delta_list", "q_list",
                "t_list", "tolerances", "output_dir", "order_check", "schema_version"):
        if key in raw:
            kw[key] = raw[key]
    grid = raw.get("grid") or {}
    if "n" in grid:
        kw["n"] = int(grid["n"])
    if "length" in grid:
        kw["length"] = float(grid["length"])
    dens = raw.get("density") or {}
    for key in ("bandwidth", "amplitude", "decay"):
        if key in dens:
            kw[key] = dens[key]
    mix = raw.get("mixture") or {}
    if "components" in mix:
        kw["mixture"] = list(mix["components"])
    if "n_components" in mix:
        kw["mixture_components"] = int(mix["n_components"])
    if "extremal" in raw:
        try:
            kw["extremal"] = ExtremalConfig(**raw["extremal"])
        except TypeError as exc:
            raise ConfigError(f"bad extremal section: {exc}") from None
    if "q_list" in raw and "delta_list" not in raw:
        kw["delta_list"] = [1.0 if q == 1 else q_to_delta(q) for q in raw["q_list"]]
    try:
        return RunConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return from_dict(raw or {})


def q_from_delta_list(deltas) -> list[float]:
    return [delta_to_q(d) for d in deltas]
