"""Run configuration: flat key = value text with one section per concern.

Grammar (INI subset, parsed with configparser):

    [model]
    kind = nn | powerlaw | xxz
    L = <int>
    J = <float>            ; default 1.0
    alpha = <float>        ; powerlaw only
    delta = <float>        ; xxz only
    gamma_g = <float>
    gamma_d = <float>

    [run]
    engine = corrmat | adiabatic | adiabatic-special | oracle | tebd
    t_max = <float>
    sampling = log | linear   ; default log
    points = <int>            ; default 200
    t_min = <float>           ; log grids only, optional
    dt = <float>              ; engine default when absent
    integrator = rk4 | spectral   ; corrmat only, default rk4
    snapshots = t1, t2, ...   ; optional profile snapshot times
    seed = <int>              ; reserved (all engines deterministic)
    output_dir = <path>       ; optional, CLI --out wins
    figures = true | false    ; default false

    [tebd]
    chi = <int>               ; default 200
    sv_floor = <float>        ; default 1e-12

    [sweep]                   ; sweep command only; comma lists
    gamma_g = 1, 10, 100      ; axes: gamma_g gamma_d alpha delta L chi

Values given on the command line as ``--override section.key=value`` replace
file values before validation.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

from dephfill.models import ModelSpec, ModelError, NEAREST_NEIGHBOR, POWER_LAW, XXZ
from dephfill.oracle import MAX_ORACLE_SITES

ENGINES = ("corrmat", "adiabatic", "adiabatic-special", "oracle", "tebd")
SWEEP_AXES = ("gamma_g", "gamma_d", "alpha", "delta", "L", "chi")
MAX_SWEEP_RUNS = 10_000


class ConfigError(ValueError):
    """Raised with a single-line machine-parsable reason."""

    def __init__(self, reason: str):
        super().__init__(f"invalid-config: {reason}")


@dataclass
class RunConfig:
    model: ModelSpec
    engine: str
    t_max: float
    sampling: str = "log"
    points: int = 200
    t_min: float | None = None
    dt: float | None = None
    integrator: str = "rk4"
    chi: int = 200
    sv_floor: float = 1e-12
    snapshots: tuple[float, ...] = field(default_factory=tuple)
    seed: int = 0
    output_dir: str | None = None
    figures: bool = False

    def validate(self) -> "RunConfig":
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.t_max <= 0:
            raise ConfigError(f"t_max must be > 0, got {self.t_max}")
        if self.points < 2:
            raise ConfigError(f"points must be >= 2, got {self.points}")
        if self.sampling not in ("log", "linear"):
            raise ConfigError(f"sampling must be log or linear, got {self.sampling!r}")
        if self.integrator not in ("rk4", "spectral"):
            raise ConfigError(f"integrator must be rk4 or spectral, got {self.integrator!r}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.chi < 1:
            raise ConfigError(f"chi must be >= 1, got {self.chi}")
        kind = self.model.kind
        if self.engine == "oracle" and self.model.L > MAX_ORACLE_SITES:
            raise ConfigError(
                f"oracle engine limited to L <= {MAX_ORACLE_SITES}, got L={self.model.L}")
        if self.engine == "tebd" and kind != XXZ:
            raise ConfigError(f"tebd engine requires kind=xxz, got {kind}")
        if self.engine in ("adiabatic", "adiabatic-special") and kind != NEAREST_NEIGHBOR:
            raise ConfigError(
                f"{self.engine} engine requires kind=nn (its generator assumes "
                f"nearest-neighbor hopping), got {kind}")
        if self.engine == "corrmat" and kind not in (NEAREST_NEIGHBOR, POWER_LAW):
            raise ConfigError(f"corrmat engine requires kind=nn or powerlaw, got {kind}")
        if self.engine in ("adiabatic", "adiabatic-special") and self.model.gamma_d <= 0:
            raise ConfigError("adiabatic engines require gamma_d > 0")
        return self


def _get(parser, section, key, cast, default=None, required=False):
    if not parser.has_option(section, key) or parser.get(section, key).strip() == "":
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    raw = parser.get(section, key).strip()
    try:
        if cast is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(p.strip()) for p in raw.split(",") if p.strip())


def load_config(path, overrides=()) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    apply_overrides(parser, overrides)
    return config_from_parser(parser)


def apply_overrides(parser: configparser.ConfigParser, overrides) -> None:
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        target, value = ov.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override key must be section.key, got {target!r}")
        section, key = target.split(".", 1)
        section, key = section.strip(), key.strip()
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value.strip())


def config_from_parser(parser: configparser.ConfigParser) -> RunConfig:
    if not parser.has_section("model"):
        raise ConfigError("missing [model] section")
    if not parser.has_section("run"):
        raise ConfigError("missing [run] section")
    try:
        model = ModelSpec(
            kind=_get(parser, "model", "kind", str, required=True),
            L=_get(parser, "model", "L", int, required=True),
            J=_get(parser, "model", "J", float, default=1.0),
            alpha=_get(parser, "model", "alpha", float),
            delta=_get(parser, "model", "delta", float, default=0.0),
            gamma_g=_get(parser, "model", "gamma_g", float, default=0.0),
            gamma_d=_get(parser, "model", "gamma_d", float, default=0.0),
        )
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    snapshots_raw = _get(parser, "run", "snapshots", str, default="")
    cfg = RunConfig(
        model=model,
        engine=_get(parser, "run", "engine", str, required=True),
        t_max=_get(parser, "run", "t_max", float, required=True),
        sampling=_get(parser, "run", "sampling", str, default="log"),
        points=_get(parser, "run", "points", int, default=200),
        t_min=_get(parser, "run", "t_min", float),
        dt=_get(parser, "run", "dt", float),
        integrator=_get(parser, "run", "integrator", str, default="rk4"),
        chi=_get(parser, "tebd", "chi", int, default=200) if parser.has_section("tebd") else 200,
        sv_floor=_get(parser, "tebd", "sv_floor", float, default=1e-12) if parser.has_section("tebd") else 1e-12,
        snapshots=_float_list(snapshots_raw) if snapshots_raw else (),
        seed=_get(parser, "run", "seed", int, default=0),
        output_dir=_get(parser, "run", "output_dir", str),
        figures=_get(parser, "run", "figures", bool, default=False),
    )
    return cfg.validate()


def sweep_axes(parser: configparser.ConfigParser) -> dict[str, tuple]:
    """Axis lists from the [sweep] section; empty dict means a single run."""
    axes: dict[str, tuple] = {}
    if not parser.has_section("sweep"):
        return axes
    for key in parser.options("sweep"):
        name = "L" if key.lower() == "l" else key
        if name not in SWEEP_AXES:
            raise ConfigError(
                f"sweep axis {name!r} not supported (choose from {SWEEP_AXES})")
        raw = parser.get("sweep", key)
        if name in ("L", "chi"):
            vals = tuple(int(p.strip()) for p in raw.split(",") if p.strip())
        else:
            vals = _float_list(raw)
        if not vals:
            raise ConfigError(f"sweep axis {name} has no values")
        axes[name] = vals
    return axes


def apply_axis_point(cfg: RunConfig, point: dict) -> RunConfig:
    model_kw = {}
    cfg_kw = {}
    for key, val in point.items():
        if key == "chi":
            cfg_kw["chi"] = int(val)
        elif key == "L":
            model_kw["L"] = int(val)
        else:
            model_kw[key] = val
    model = replace(cfg.model, **model_kw) if model_kw else cfg.model
    out = replace(cfg, model=model, **cfg_kw)
    return out.validate()


def config_to_text(cfg: RunConfig) -> str:
    """Round-trippable flat text echo of a configuration."""
    parser = configparser.ConfigParser()
    parser["model"] = {
        "kind": cfg.model.kind,
        "L": str(cfg.model.L),
        "J": repr(cfg.model.J),
        "gamma_g": repr(cfg.model.gamma_g),
        "gamma_d": repr(cfg.model.gamma_d),
    }
    if cfg.model.alpha is not None:
        parser["model"]["alpha"] = repr(cfg.model.alpha)
    if cfg.model.kind == XXZ:
        parser["model"]["delta"] = repr(cfg.model.delta)
    run = {
        "engine": cfg.engine,
        "t_max": repr(cfg.t_max),
        "sampling": cfg.sampling,
        "points": str(cfg.points),
        "seed": str(cfg.seed),
        "figures": str(cfg.figures).lower(),
    }
    if cfg.t_min is not None:
        run["t_min"] = repr(cfg.t_min)
    if cfg.dt is not None:
        run["dt"] = repr(cfg.dt)
    if cfg.engine == "corrmat":
        run["integrator"] = cfg.integrator
    if cfg.snapshots:
        run["snapshots"] = ", ".join(repr(t) for t in cfg.snapshots)
    parser["run"] = run
    if cfg.engine == "tebd":
        parser["tebd"] = {"chi": str(cfg.chi), "sv_floor": repr(cfg.sv_floor)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def config_flat_items(cfg: RunConfig) -> list[tuple[str, str]]:
    """Dotted (section.key, value) pairs of the config echo."""
    parser = configparser.ConfigParser()
    parser.read_string(config_to_text(cfg))
    items = []
    for section in parser.sections():
        for key, val in parser.items(section):
            items.append((f"{section}.{key}", val))
    return items


def write_manifest(path, cfg: RunConfig, wall_time_s: float, outputs: dict[str, Path],
                   diagnostics: dict | None = None, code_version: str = "") -> None:
    """Flat key = value record that pins the run for re-execution."""
    lines = ["manifest_version = 1", f"code_version = {code_version}"]
    lines.append(f"wall_time_s = {wall_time_s!r}")
    for key, val in config_flat_items(cfg):
        lines.append(f"config.{key} = {val}")
    for name, p in sorted(outputs.items()):
        lines.append(f"output.{name}.sha256 = {sha256_file(p)}")
    for key, val in sorted((diagnostics or {}).items()):
        lines.append(f"diag.{key} = {val}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
