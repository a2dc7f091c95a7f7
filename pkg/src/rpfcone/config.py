"""Run configuration: JSON (or TOML) files driving every CLI subcommand.

A config is fully serializable and a run is reproducible from config + seed:
reports embed the config hash and never contain wall-clock data.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError

ENV_PREFIX = "RPFCONE_"  # RPFCONE_SEED / RPFCONE_RESOLUTION / RPFCONE_OUT override


@dataclass
class RunConfig:
    map: dict = field(default_factory=lambda: {"family": "doubling"})
    potential: dict = field(default_factory=lambda: {"family": "constant", "c": 0.0})
    resolution: int = 4096
    sigma: float = 0.9
    delta: float = 0.25
    alpha: float = 0.5
    cone_k: float | None = None       # None: the default_k heuristic
    q: int = 1
    seed: int = 0
    horizon: int = 500
    samples: int = 100000
    birkhoff_n: int = 10000
    n_max: int = 64                   # correlation horizon
    epsilon: float | None = None      # Gibbs ball radius, default delta/2
    t_min: float = -0.2               # analyticity sweep range
    t_max: float = 0.2
    t_steps: int = 41
    skew: dict = field(default_factory=lambda: {"rho": 0.3, "eps": 0.2, "ybar": 0.5})
    out_dir: str = "."
    threads: int = 1                  # recorded; pipelines are deterministic single-process

    def validate(self):
        if self.resolution < 2:
            raise ConfigError("resolution must be >= 2")
        if not 0.0 < self.sigma < 1.0:
            raise ConfigError("sigma must lie in (0,1)")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0,1]")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be a u64")
        return self

    def to_dict(self):
        return asdict(self)

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path=None, overrides=None):
    """Build a RunConfig from an optional JSON/TOML file, the RPFCONE_* env
    overrides and explicit CLI overrides (strongest)."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        try:
            if path.endswith(".toml"):
                raw = tomllib.loads(blob.decode())
            else:
                raw = json.loads(blob.decode())
        except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a table/object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, cast in (("SEED", int), ("RESOLUTION", int), ("OUT", str),
                      ("THREADS", int)):
        env = os.environ.get(ENV_PREFIX + key)
        if env is not None:
            raw[{"OUT": "out_dir"}.get(key, key.lower())] = cast(env)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    try:
        return RunConfig(**raw).validate()
    except TypeError as e:
        raise ConfigError(str(e)) from None
