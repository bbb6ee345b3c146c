"""Run configuration: a TOML file with a fixed schema key and no unknown keys."""
from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .integrator import IntegratorConfig
from .manifold import DEFAULT_EPS, REFINE_CFG, TRACE_CFG, TRUNCATION_RADIUS
from .model import Dims

SCHEMA = "coho1/config/1"
OUTPUT_ENV = "COHO1_OUTPUT_DIR"
FORMATS = ("csv", "json", "svg")


@dataclass(frozen=True)
class ScanConfig:
    h: float = 0.0
    min_samples: int = 2000
    truncation_radius: float = TRUNCATION_RADIUS


@dataclass(frozen=True)
class BarrierConfig:
    n: int = 9
    delta: float = 0.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "coho1-out"
    formats: tuple = FORMATS


@dataclass(frozen=True)
class RunConfig:
    dims: Dims = Dims(4, 5)
    trace: IntegratorConfig = TRACE_CFG
    refine: IntegratorConfig = REFINE_CFG
    epsilon: float = DEFAULT_EPS
    scan: ScanConfig = field(default_factory=ScanConfig)
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "dims": {"d1": self.dims.d1, "d2": self.dims.d2},
            "trace": asdict(self.trace),
            "refine": asdict(self.refine),
            "shoot": {"epsilon": self.epsilon},
            "scan": asdict(self.scan),
            "barrier": asdict(self.barrier),
            "output": {"directory": self.output.directory, "formats": list(self.output.formats)},
        }

    @property
    def out_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output.directory)


def _section(data: dict, name: str, cls, base):
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in fields(cls)}
    extra = sorted(set(raw) - known)
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(extra)}")
    try:
        return replace(base, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    if data.get("schema") != SCHEMA:
        raise ConfigError(f'missing or wrong schema key, expected schema = "{SCHEMA}"')
    top = {"schema", "dims", "trace", "refine", "shoot", "scan", "barrier", "output"}
    extra = sorted(set(data) - top)
    if extra:
        raise ConfigError(f"unknown top-level keys: {', '.join(extra)}")
    base = RunConfig()
    dims_raw = data.get("dims", {"d1": base.dims.d1, "d2": base.dims.d2})
    if not isinstance(dims_raw, dict) or set(dims_raw) - {"d1", "d2"}:
        raise ConfigError("[dims] accepts only d1 and d2")
    try:
        dims = Dims(int(dims_raw.get("d1", base.dims.d1)), int(dims_raw.get("d2", base.dims.d2)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[dims]: {exc}") from exc
    shoot = data.get("shoot", {})
    if not isinstance(shoot, dict) or set(shoot) - {"epsilon"}:
        raise ConfigError("[shoot] accepts only epsilon")
    eps = float(shoot.get("epsilon", base.epsilon))
    if not 0.0 < eps <= 1e-3:
        raise ConfigError("shoot.epsilon must lie in (0, 1e-3]")
    scan = _section(data, "scan", ScanConfig, base.scan)
    if not -1.0 < scan.h < 1.0 or scan.min_samples < 2 or scan.truncation_radius <= 0:
        raise ConfigError("scan values out of range")
    out = _section(data, "output", OutputConfig, base.output)
    out = replace(out, formats=tuple(out.formats))
    if set(out.formats) - set(FORMATS):
        raise ConfigError(f"output.formats must be a subset of {FORMATS}")
    return RunConfig(
        dims=dims,
        trace=_section(data, "trace", IntegratorConfig, base.trace),
        refine=_section(data, "refine", IntegratorConfig, base.refine),
        epsilon=eps,
        scan=scan,
        barrier=_section(data, "barrier", BarrierConfig, base.barrier),
        output=out,
    )


def load(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(data)


def dumps(cfg: RunConfig) -> str:
    """TOML text for ``cfg`` that :func:`load` reads back to an equal config."""
    d = cfg.to_dict()
    lines = [f'schema = "{SCHEMA}"']

    def val(v):
        if isinstance(v, str):
            return f'"{v}"'
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(val(x) for x in v) + "]"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    for sec in ("dims", "trace", "refine", "shoot", "scan", "barrier", "output"):
        lines.append(f"\n[{sec}]")
        for k, v in d[sec].items():
            lines.append(f"{k} = {val(v)}")
    return "\n".join(lines) + "\n"
