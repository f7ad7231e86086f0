"""Experiment configuration: JSON in, validated dataclass out."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..model import RandomSeed, density_from_dict

EXPERIMENTS = (
    "thin_shell",
    "clt_marginal",
    "unconditional_diag",
    "multidim_marginal",
    "diaconis_freedman",
    "jl_check",
    "mf_concentration",
)

# experiments that never sample the configured density
_SPHERE_ONLY = {"diaconis_freedman", "jl_check"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    n: int
    m: int
    density: dict = field(default_factory=lambda: {"type": "cube"})
    k: int | None = None
    direction_count: int = 200
    epsilon_grid: list = field(default_factory=lambda: [0.1])
    seed: RandomSeed = field(default_factory=lambda: RandomSeed(0))
    workers: int = 1
    out_dir: str = "results"
    n_sweep: list | None = None
    k_sweep: list | None = None
    subspace_count: int = 100
    t_grid: list | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.seed = RandomSeed.coerce(self.seed)
        self.validate()

    @property
    def dims(self) -> list[int]:
        return sorted(int(v) for v in (self.n_sweep or [self.n]))

    @property
    def ks(self) -> list[int]:
        if self.k_sweep:
            return sorted(int(v) for v in self.k_sweep)
        return [int(self.k)] if self.k is not None else [1]

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if int(self.m) < 1000:
            raise ConfigError(f"m must be at least 1000, got {self.m}")
        if any(d < 1 for d in self.dims):
            raise ConfigError("dimensions must be positive")
        for k in ([self.k] if self.k is not None else []) + list(self.k_sweep or []):
            if not 1 <= int(k) <= min(self.dims):
                raise ConfigError(f"k={k} must satisfy 1 <= k <= n")
        if self.direction_count < 1 or self.subspace_count < 1 or self.workers < 1:
            raise ConfigError("direction_count, subspace_count and workers must be positive")
        if any(not 0 <= float(e) <= 1 for e in self.epsilon_grid):
            raise ConfigError("epsilon values must lie in [0, 1]")
        if self.experiment not in _SPHERE_ONLY:
            try:
                for d in self.dims:
                    if density_from_dict(self.density, d).dim != d:
                        raise ValueError(f"density does not have dimension {d}")
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid density description: {exc}") from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["seed"] = self.seed.to_dict()
        return out

    def hash(self) -> str:
        """128-bit digest of everything that affects results (``workers`` and ``out_dir`` excluded)."""
        payload = self.to_dict()
        payload.pop("workers")
        payload.pop("out_dir")
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:32]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"experiment", "n", "m"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**raw)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(raw)
