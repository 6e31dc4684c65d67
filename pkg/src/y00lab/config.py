"""Experiment configuration, run manifests and output plumbing."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
import os
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from y00lab import __version__
from y00lab.errors import ConfigError
from y00lab.keystream import PRNG_KINDS, symbol_width


@dataclass
class ExperimentConfig:
    # signal set and channel
    M: int = 16
    alpha0: float = 3.0
    eta: float = 1.0
    scheme: str = "phase"
    mapping: str = "identity"
    channel: str = "heterodyne"  # or "noiseless"
    # key expansion
    prng: str = "lfsr"
    key_bits: int = 16
    k_seed: int | None = None
    dk_seed: int | None = None
    slots: int = 10_000
    # fca
    t_lcm: int | str | None = None
    blocks: int | str | None = None
    eps: float | str = "2^-64"
    acceptance: Any = "uniform"
    error_dist: str | None = None
    # monte carlo
    mc_samples: int = 100_000
    theory: bool = True
    # qdetect
    hypotheses: int = 16
    frame_slots: int = 4
    frames: list | None = None
    # classical break
    lfsr_length: int = 16
    lfsr_taps: list | None = None
    observed_bits: int | None = None
    trials: int = 100
    # run
    seed: int = 0
    out: str = "y00lab-out"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "ExperimentConfig":
        symbol_width(self.M)
        if not 0.0 <= float(self.eta) <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.scheme not in ("phase", "intensity"):
            raise ConfigError(f"scheme must be 'phase' or 'intensity', got {self.scheme!r}")
        if self.channel not in ("heterodyne", "noiseless"):
            raise ConfigError(f"channel must be 'heterodyne' or 'noiseless', got {self.channel!r}")
        if self.prng not in PRNG_KINDS:
            raise ConfigError(f"prng must be one of {PRNG_KINDS}, got {self.prng!r}")
        if not 0 < self.eps_value() <= 1:
            raise ConfigError(f"eps must lie in (0, 1], got {self.eps}")
        if self.slots < 0:
            raise ConfigError("slots must be non-negative")
        if self.alpha0 <= 0:
            raise ConfigError("alpha0 must be positive")
        for key in ("mapping", "error_dist"):
            value = getattr(self, key)
            if value and key == "mapping" and (value == "identity" or value.startswith("random:")):
                continue
            if value and not Path(value).exists():
                raise ConfigError(f"{key} file not found: {value}")
        return self

    def eps_value(self) -> float:
        return parse_eps(self.eps)

    def big(self, key: str) -> int | None:
        value = getattr(self, key)
        if value is None:
            return None
        return parse_bigint(value)


def parse_eps(value) -> float:
    """Accept a float or a string such as ``2^-64``."""
    if isinstance(value, str):
        text = value.replace(" ", "")
        if text.startswith("2^"):
            return 2.0 ** float(text[2:])
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"cannot parse eps {value!r}") from None
    return float(value)


def parse_bigint(value) -> int:
    """Integers, decimal strings, or ``2^k-1`` style expressions."""
    if isinstance(value, int):
        return value
    text = str(value).replace(" ", "")
    if text.startswith("2^"):
        body = text[2:]
        for sign in ("-", "+"):
            if sign in body:
                exp, off = body.split(sign, 1)
                return (1 << int(exp)) + (int(off) if sign == "+" else -int(off))
        return 1 << int(body)
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"cannot parse integer {value!r}") from None


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path: str | None, overrides: list[str] = (), seed: int | None = None,
                out: str | None = None) -> ExperimentConfig:
    data: dict = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for item in overrides:
        key, value = parse_override(item)
        data[key] = value
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["out"] = out
    try:
        cfg = ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named stage, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), zlib.crc32(name.encode())]))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return str(o)


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = __version__
    outputs: dict = field(default_factory=dict)
    started: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())
    finished: str | None = None

    @property
    def digest(self) -> str:
        """Hash of everything that determines the outputs (timestamps and paths excluded)."""
        config = {k: v for k, v in self.config.items() if k != "out"}
        payload = canonical_json({"command": self.command, "config": config,
                                  "seed": self.seed, "version": self.version})
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hash"] = self.digest
        return d


def atomic_write(path: str | os.PathLike, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
