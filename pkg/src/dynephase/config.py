"""Run configuration: YAML files plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .policies import FeedbackPolicy, MarkII, describe, parse_policy, policy_from_dict, policy_to_dict
from .sde import TimeGrid
from .squeezed import SqueezedState, make_optimal_squeezed

SCHEMA_VERSION = 1
STATE_KINDS = ("coherent", "optimal_squeezed", "custom")
PHASE_MODES = ("zero", "uniform")


class ConfigError(ValueError):
    """Invalid configuration value or file."""


@dataclass(frozen=True)
class SimConfig:
    """One ensemble run.

    ``dv_feedback`` is a float in (0, 1) or ``"paper"``, the default step rule
    nbar * V_th / 25; ``refine`` divides whichever interval results.
    ``alpha``/``xi`` are only read for ``state_kind="custom"``.
    """

    nbar: float = 100.0
    policy: FeedbackPolicy = field(default_factory=MarkII)
    state_kind: str = "optimal_squeezed"
    alpha: complex = 0j
    xi: complex = 0j
    dv_feedback: float | str = "paper"
    refine: float = 1.0
    substeps: int = 1
    n_trajectories: int = 1000
    seed: int = 0
    true_phase_mode: str = "uniform"
    out_dir: str | None = None
    write_trajectories: bool = True
    trace: bool = False

    def __post_init__(self):
        if self.state_kind not in STATE_KINDS:
            raise ConfigError(f"state_kind must be one of {STATE_KINDS}, got {self.state_kind!r}")
        if self.state_kind != "custom" and not (math.isfinite(self.nbar) and self.nbar > 0):
            raise ConfigError(f"nbar must be positive, got {self.nbar!r}")
        if self.true_phase_mode not in PHASE_MODES:
            raise ConfigError(f"true_phase_mode must be one of {PHASE_MODES}")
        if isinstance(self.dv_feedback, str):
            if self.dv_feedback != "paper":
                raise ConfigError(f"dv_feedback must be a number or 'paper', got {self.dv_feedback!r}")
        elif not 0.0 < self.dv_feedback < 1.0:
            raise ConfigError(f"dv_feedback must lie in (0, 1), got {self.dv_feedback!r}")
        if not self.refine >= 1.0:
            raise ConfigError(f"refine must be >= 1, got {self.refine!r}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ConfigError(f"substeps must be a positive integer, got {self.substeps!r}")
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 1:
            raise ConfigError(f"n_trajectories must be >= 1, got {self.n_trajectories!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.out_dir is not None:
            _check_writable(Path(self.out_dir))

    def state(self) -> SqueezedState:
        if self.state_kind == "coherent":
            return SqueezedState(math.sqrt(self.nbar))
        if self.state_kind == "custom":
            return SqueezedState(complex(self.alpha), complex(self.xi))
        try:
            return make_optimal_squeezed(self.nbar)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self) -> TimeGrid:
        if self.dv_feedback == "paper":
            return TimeGrid.step_rule(self.state_nbar, self.substeps, self.refine)
        return TimeGrid(self.dv_feedback / self.refine, self.substeps)

    @property
    def state_nbar(self) -> float:
        if self.state_kind == "custom":
            from .squeezed import mean_photon

            return mean_photon(self.state())
        return float(self.nbar)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = policy_to_dict(self.policy)
        d["alpha"] = [self.alpha.real, self.alpha.imag]
        d["xi"] = [self.xi.real, self.xi.imag]
        d["schema_version"] = SCHEMA_VERSION
        return d

    def physics_hash(self) -> str:
        """Hash of everything that affects numerical results (not paths or trace)."""
        d = self.to_dict()
        for k in ("out_dir", "write_trajectories", "trace"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "SimConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if isinstance(kw.get("policy"), str):
            kw["policy"] = parse_policy(kw["policy"])
        try:
            return replace(self, **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def label(self) -> str:
        return describe(self.policy)


def _check_writable(path: Path) -> None:
    probe = path
    while not probe.exists():
        if probe.parent == probe:
            break
        probe = probe.parent
    if probe.exists() and not probe.is_dir():
        raise ConfigError(f"output path {path} is not a directory")


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex values are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def config_from_dict(d: dict) -> SimConfig:
    d = dict(d or {})
    version = d.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    known = set(SimConfig.__dataclass_fields__)
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        pol = d.get("policy")
        if isinstance(pol, str):
            d["policy"] = parse_policy(pol)
        elif isinstance(pol, dict):
            d["policy"] = policy_from_dict(pol)
        for key in ("alpha", "xi"):
            if key in d:
                d[key] = _complex(d[key])
        if isinstance(d.get("dv_feedback"), (int, float)):
            d["dv_feedback"] = float(d["dv_feedback"])
        return SimConfig(**d)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    """Read a YAML run configuration (a mapping of :class:`SimConfig` fields)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data or {})


@dataclass(frozen=True)
class SweepSpec:
    """A photon-number grid run with a shared base configuration.

    With ``optimize_epsilon`` the policy must be constant-epsilon; each point
    gets a golden-section search for the epsilon of least Holevo variance.
    """

    base: SimConfig
    nbar_grid: tuple
    optimize_epsilon: bool = False
    eps_bounds: tuple = (0.2, 1.0)
    eps_tol: float = 1e-2
    search_fraction: float = 0.25
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = tuple(float(x) for x in self.nbar_grid)
        if not grid:
            raise ConfigError("nbar_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("nbar_grid must be strictly increasing")
        if any(not (x > 0 and math.isfinite(x)) for x in grid):
            raise ConfigError("nbar_grid values must be positive")
        object.__setattr__(self, "nbar_grid", grid)
        lo, hi = self.eps_bounds
        if not 0.0 <= lo < hi <= 1.0:
            raise ConfigError(f"eps_bounds must satisfy 0 <= lo < hi <= 1, got {self.eps_bounds!r}")
        if not 0 < self.search_fraction <= 1:
            raise ConfigError("search_fraction must lie in (0, 1]")

    def point(self, nbar: float) -> SimConfig:
        extra = dict(self.overrides.get(nbar, {}))
        return self.base.with_overrides(nbar=nbar, **extra)
