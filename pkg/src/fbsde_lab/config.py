"""Experiment configuration files (TOML).

Example::

    preset = "carbon"
    outputs = "runs/carbon"

    [mc]
    n_paths = 100000
    steps = 100
    seed = 0

    [picard]
    slice_iters = 8

    [model]
    E0 = -0.1

Every table and key is checked against the schema below; unknown keys are
errors.  Missing tables fall back to preset defaults.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from .bsde import PicardConfig
from .errors import ConfigError
from .model import ConditionProfile, GrowthConstants
from .regression import BasisSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TOP_KEYS = {"preset", "outputs", "mc", "basis", "picard", "pde", "declared_conditions", "model", "export"}
MC_KEYS = {"n_paths", "steps", "seed", "initial_spread"}
BASIS_KEYS = {"kind", "size", "clip_quantiles"}
PICARD_KEYS = {"max_iters", "tol", "truncation_N", "init", "scheme", "slice_iters", "u_range"}
PDE_KEYS = {"x_min", "x_max", "J", "steps", "region"}
EXPORT_KEYS = {"paths", "field", "field_x", "pde"}
CONDITION_KEYS = {"forward", "backward", "uniqueness", "C", "r", "epsilon", "kappa"}


@dataclass
class McSettings:
    n_paths: Optional[int] = None
    steps: Optional[int] = None
    seed: int = 0
    initial_spread: Optional[float] = None


@dataclass
class PdeSettings:
    x_min: float = -4.0
    x_max: float = 4.0
    J: int = 799
    steps: int = 1000
    region: Optional[tuple] = None


@dataclass
class ExportSettings:
    """Optional bulk tables: first ``paths`` paths, the field on ``field_x`` (or a default grid), the PDE grid."""

    paths: int = 0
    field: bool = False
    field_x: Optional[list] = None
    pde: bool = False


@dataclass
class ExperimentConfig:
    preset: str = "benchmark:linear"
    outputs: str = "fbsde-out"
    mc: McSettings = field(default_factory=McSettings)
    basis: Optional[BasisSpec] = None
    picard: Dict[str, Any] = field(default_factory=dict)
    pde: PdeSettings = field(default_factory=PdeSettings)
    declared_conditions: Optional[ConditionProfile] = None
    model: Dict[str, Any] = field(default_factory=dict)
    export: ExportSettings = field(default_factory=ExportSettings)

    def picard_config(self, base: Optional[PicardConfig] = None) -> PicardConfig:
        """``base`` (or the library default) with the configured fields replaced."""
        base = base if base is not None else PicardConfig()
        params = {k: getattr(base, k) for k in PICARD_KEYS}
        params.update(self.picard)
        try:
            return PicardConfig(**params)
        except ValueError as exc:
            raise ConfigError(f"cli: [picard] {exc}") from exc


def _table(raw: dict, name: str, keys: set) -> dict:
    tab = raw.get(name, {})
    if not isinstance(tab, dict):
        raise ConfigError(f"cli: '{name}' must be a table")
    unknown = set(tab) - keys
    if unknown:
        raise ConfigError(f"cli: unknown key(s) {sorted(unknown)} in [{name}]")
    return tab


def _positive_int(tab: dict, section: str, key: str) -> Optional[int]:
    if key not in tab:
        return None
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        raise ConfigError(f"cli: {section}.{key} must be a positive integer, got {v!r}")
    return v


def _positive_float(tab: dict, section: str, key: str, allow_zero=False) -> Optional[float]:
    if key not in tab:
        return None
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        kind = "nonnegative" if allow_zero else "positive"
        raise ConfigError(f"cli: {section}.{key} must be a {kind} number, got {v!r}")
    return float(v)


def parse_config(raw: dict) -> ExperimentConfig:
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"cli: unknown top-level key(s) {sorted(unknown)}")
    cfg = ExperimentConfig()
    if "preset" in raw:
        if not isinstance(raw["preset"], str):
            raise ConfigError("cli: preset must be a string")
        cfg.preset = raw["preset"]
    if "outputs" in raw:
        if not isinstance(raw["outputs"], str) or not raw["outputs"]:
            raise ConfigError("cli: outputs must be a non-empty path string")
        cfg.outputs = raw["outputs"]

    mc = _table(raw, "mc", MC_KEYS)
    seed = mc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"cli: mc.seed must be an unsigned 64-bit integer, got {seed!r}")
    cfg.mc = McSettings(
        n_paths=_positive_int(mc, "mc", "n_paths"),
        steps=_positive_int(mc, "mc", "steps"),
        seed=seed,
        initial_spread=_positive_float(mc, "mc", "initial_spread", allow_zero=True),
    )

    basis = _table(raw, "basis", BASIS_KEYS)
    if basis:
        try:
            kw = dict(basis)
            if "clip_quantiles" in kw:
                kw["clip_quantiles"] = tuple(kw["clip_quantiles"])
            cfg.basis = BasisSpec(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cli: [basis] {exc}") from exc

    picard = dict(_table(raw, "picard", PICARD_KEYS))
    if "u_range" in picard:
        picard["u_range"] = tuple(picard["u_range"])
    _positive_int(picard, "picard", "max_iters")
    _positive_float(picard, "picard", "tol")
    _positive_float(picard, "picard", "truncation_N")
    cfg.picard = picard
    cfg.picard_config()  # validate early

    pde = _table(raw, "pde", PDE_KEYS)
    ps = PdeSettings()
    for key in ("x_min", "x_max"):
        if key in pde:
            if not isinstance(pde[key], (int, float)) or isinstance(pde[key], bool):
                raise ConfigError(f"cli: pde.{key} must be a number")
            setattr(ps, key, float(pde[key]))
    ps.J = _positive_int(pde, "pde", "J") or ps.J
    ps.steps = _positive_int(pde, "pde", "steps") or ps.steps
    if "region" in pde:
        reg = pde["region"]
        if not isinstance(reg, list) or len(reg) != 2 or not reg[0] < reg[1]:
            raise ConfigError("cli: pde.region must be [lo, hi] with lo < hi")
        ps.region = (float(reg[0]), float(reg[1]))
    if not ps.x_min < ps.x_max:
        raise ConfigError("cli: pde.x_min must be below pde.x_max")
    cfg.pde = ps

    cond = _table(raw, "declared_conditions", CONDITION_KEYS)
    if cond:
        try:
            consts = GrowthConstants(
                C=float(cond.get("C", 1.0)),
                r=float(cond.get("r", 0.0)),
                epsilon=float(cond.get("epsilon", 1.0)),
                kappa=float(cond.get("kappa", 1.0)),
            )
            cfg.declared_conditions = ConditionProfile(
                cond.get("forward", "none"), cond.get("backward", "none"), cond.get("uniqueness", "none"), consts
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cli: [declared_conditions] {exc}") from exc

    ex = _table(raw, "export", EXPORT_KEYS)
    es = ExportSettings()
    if "paths" in ex:
        v = ex["paths"]
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ConfigError(f"cli: export.paths must be a nonnegative integer, got {v!r}")
        es.paths = v
    for key in ("field", "pde"):
        if key in ex:
            if not isinstance(ex[key], bool):
                raise ConfigError(f"cli: export.{key} must be true or false")
            setattr(es, key, ex[key])
    if "field_x" in ex:
        fx = ex["field_x"]
        if not isinstance(fx, list) or not fx:
            raise ConfigError("cli: export.field_x must be a non-empty list of nodes")
        es.field_x = fx
        es.field = True
    cfg.export = es

    model = raw.get("model", {})
    if not isinstance(model, dict):
        raise ConfigError("cli: 'model' must be a table")
    cfg.model = dict(model)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cli: cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cli: config {path} is not valid TOML: {exc}") from exc
    return parse_config(raw)


__all__ = ["ExperimentConfig", "ExportSettings", "McSettings", "PdeSettings", "load_config", "parse_config"]
