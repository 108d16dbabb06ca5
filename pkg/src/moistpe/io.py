"""Configuration files, snapshots and manifests.

Config files are flat INI: sections ``grid``, ``params``, ``forcing``,
``stepping``, ``initial``, ``output`` and an optional ``experiment``.
Unknown sections or keys, missing required keys and out-of-range values are
hard errors naming the offending ``section.key``.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .grid import ForcingSpec, Grid, PhysParams, State, make_grid
from .timestepper import StepConfig


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}: {message}{where}" if key else message + where)
        self.key = key
        self.line = line


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class OutOfRange(ConfigError):
    pass


class SnapshotError(ValueError):
    """Malformed or truncated snapshot file."""


class VersionError(SnapshotError):
    pass


_REQUIRED = object()


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _any(v):
    return True


def _modes(text: str) -> tuple[int, int, int]:
    parts = tuple(int(x) for x in text.replace(" ", "").split(","))
    if len(parts) != 3:
        raise ValueError("expected three comma-separated integers")
    return parts


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


# section -> key -> (parser, default, validity check, description of the range)
SCHEMA: dict[str, dict[str, tuple[Callable, Any, Callable, str]]] = {
    "grid": {
        "nx": (int, _REQUIRED, lambda v: v >= 4, ">= 4"),
        "ny": (int, _REQUIRED, lambda v: v >= 4, ">= 4"),
        "nz": (int, _REQUIRED, lambda v: v >= 4, ">= 4"),
        "lx": (float, 1.0, _positive, "> 0"),
        "ly": (float, 1.0, _positive, "> 0"),
    },
    "params": {
        **{k: (float, 1.0, _positive, "> 0") for k in ("Re1", "Re2", "Rt1", "Rt2", "Rt3", "Rt4", "Ro", "alpha", "beta")},
        "f": (float, 1.0, _any, "any real"),
        "a": (float, 0.618, _positive, "> 0"),
        "b": (float, 0.3, _positive, "> 0"),
        "P": (float, 1.0, _positive, "> 0"),
        "p0": (float, 0.2, _positive, "> 0"),
    },
    "forcing": {
        "Q1": (str, "zero", lambda v: v in ("zero", "mode", "bump"), "one of zero, mode, bump"),
        "Q1_amplitude": (float, 0.0, _nonneg, ">= 0"),
        "Q1_modes": (_modes, (1, 1, 1), lambda v: min(v) >= 0, "non-negative integers"),
        "Q2": (str, "zero", lambda v: v in ("zero", "mode", "bump"), "one of zero, mode, bump"),
        "Q2_amplitude": (float, 0.0, _nonneg, ">= 0"),
        "Q2_modes": (_modes, (1, 1, 1), lambda v: min(v) >= 0, "non-negative integers"),
    },
    "stepping": {
        "dt": (float, _REQUIRED, _positive, "> 0"),
        "t_end": (float, _REQUIRED, _nonneg, ">= 0"),
        "theta": (float, 1.0, lambda v: v in (0.5, 1.0), "0.5 or 1"),
        "cfl_max": (float, 0.5, lambda v: 0 < v <= 1, "in (0, 1]"),
        "snapshot_every": (int, 10, lambda v: v >= 1, ">= 1"),
        "solver": (str, "direct", lambda v: v in ("direct", "cg"), "direct or cg"),
    },
    "initial": {
        "seed": (int, 0, _nonneg, ">= 0"),
        "amplitude": (float, 0.2, _nonneg, ">= 0"),
        "modes": (int, 3, lambda v: 1 <= v <= 8, "in [1, 8]"),
    },
    "output": {
        "directory": (str, "out", lambda v: bool(v), "non-empty"),
        "energy": (_bool, True, _any, "boolean"),
        "snapshots": (_bool, True, _any, "boolean"),
        "figures": (_bool, True, _any, "boolean"),
    },
    "experiment": {
        "radius": (float, 0.5, _positive, "> 0"),
        "tail": (float, 2.0, _positive, "> 0"),
        "pre_time": (float, 4.0, _nonneg, ">= 0"),
        "t_bar": (float, 1.0, _positive, "> 0"),
        "deltas": (_floats, (1e-3, 1e-4, 1e-5), lambda v: len(v) >= 2 and min(v) > 0, "at least two positive values"),
        "window": (float, 1.0, _positive, "> 0"),
        "max_lag": (int, 2, lambda v: v >= 1, ">= 1"),
        "theta": (float, 0.5, lambda v: 0 < v < 1, "in (0, 1)"),
        "k_max": (int, 2, lambda v: v >= 1, ">= 1"),
        "samples": (int, 200, lambda v: v >= 2, ">= 2"),
        "stride": (int, 1, lambda v: v >= 1, ">= 1"),
        "map_time": (float, 0.1, _positive, "> 0"),
    },
}

_OPTIONAL_SECTIONS = {"experiment"}


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    energy: bool = True
    snapshots: bool = True
    figures: bool = True


@dataclass(frozen=True)
class InitialConfig:
    seed: int = 0
    amplitude: float = 0.2
    modes: int = 3


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    params: PhysParams
    stepping: StepConfig
    initial: InitialConfig = InitialConfig()
    output: OutputConfig = OutputConfig()
    experiment: Mapping[str, Any] | None = None
    raw: Mapping[str, Mapping[str, Any]] = field(default_factory=dict, compare=False, repr=False)

    @property
    def fingerprint(self) -> str:
        return fingerprint_of(self.raw)

    def with_seed(self, seed: int) -> "RunConfig":
        raw = {k: dict(v) for k, v in self.raw.items()}
        raw["initial"]["seed"] = seed
        return replace(self, initial=replace(self.initial, seed=seed), raw=raw)


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return n
        elif current == section and key is not None and "=" in s and s.split("=", 1)[0].strip() == key:
            return n
    return None


def _format(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_format(x) for x in v)
    return str(v)


def dump_config(raw: Mapping[str, Mapping[str, Any]]) -> str:
    """Canonical text: sections and keys in schema order, floats by repr."""
    out = []
    for section, keys in SCHEMA.items():
        if section not in raw:
            continue
        out.append(f"[{section}]")
        for key in keys:
            if key in raw[section]:
                out.append(f"{key} = {_format(raw[section][key])}")
        out.append("")
    return "\n".join(out)


def fingerprint_of(raw: Mapping[str, Mapping[str, Any]]) -> str:
    return hashlib.sha256(dump_config(raw).encode("utf-8")).hexdigest()


def canonical_hash(raw: Mapping[str, Mapping[str, Any]]) -> str:
    """sha256 over sorted sections and keys with platform-independent value text."""
    lines = []
    for section in sorted(raw):
        lines.append(f"[{section}]")
        lines.extend(f"{k}={_format(raw[section][k])}" for k in sorted(raw[section]))
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def parse_config(text: str) -> RunConfig:
    """Parse and validate INI text into a :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    raw: dict[str, dict[str, Any]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise UnknownKey("unknown section", section, _line_of(text, section, None))
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise UnknownKey("unknown key", f"{section}.{key}", _line_of(text, section, key))

    for section, keys in SCHEMA.items():
        if section in _OPTIONAL_SECTIONS and section not in cp:
            continue
        raw[section] = {}
        for key, (conv, default, ok, desc) in keys.items():
            name = f"{section}.{key}"
            if section in cp and key in cp[section]:
                text_value = cp[section][key].strip()
                try:
                    value = conv(text_value)
                except (TypeError, ValueError) as exc:
                    raise OutOfRange(f"cannot parse {text_value!r}: {exc}", name, _line_of(text, section, key)) from exc
                if isinstance(value, float) and not math.isfinite(value):
                    raise OutOfRange(f"value {value!r} is not finite", name, _line_of(text, section, key))
                if not ok(value):
                    raise OutOfRange(f"value {value!r} out of range (expected {desc})", name,
                                     _line_of(text, section, key))
            elif default is _REQUIRED:
                raise MissingKey("required key missing", name)
            else:
                value = default
            raw[section][key] = value

    pr = raw["params"]
    if not pr["P"] > pr["p0"]:
        raise OutOfRange(f"surface pressure must exceed top pressure ({pr['P']!r} <= {pr['p0']!r})", "params.P",
                         _line_of(text, "params", "P"))
    return build_config(raw)


def build_config(raw: Mapping[str, Mapping[str, Any]]) -> RunConfig:
    gr, pr, fo, st = raw["grid"], raw["params"], raw["forcing"], raw["stepping"]
    grid = make_grid(gr["nx"], gr["ny"], gr["nz"], gr["lx"], gr["ly"])
    params = PhysParams(
        **pr,
        Q1=ForcingSpec(fo["Q1"], fo["Q1_amplitude"], tuple(fo["Q1_modes"])),
        Q2=ForcingSpec(fo["Q2"], fo["Q2_amplitude"], tuple(fo["Q2_modes"])),
    )
    stepping = StepConfig(
        dt=st["dt"], t_end=st["t_end"], theta=st["theta"], cfl_max=st["cfl_max"],
        snapshot_every=st["snapshot_every"], solver=st["solver"],
    )
    return RunConfig(
        grid=grid,
        params=params,
        stepping=stepping,
        initial=InitialConfig(**raw["initial"]),
        output=OutputConfig(**raw["output"]),
        experiment=dict(raw["experiment"]) if "experiment" in raw else None,
        raw={k: dict(v) for k, v in raw.items()},
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------- snapshots

MAGIC = b"MPE1"
SNAPSHOT_VERSION = 1


def save_snapshot(s: State, g: Grid, path: str | os.PathLike, params: PhysParams | None = None) -> None:
    """Write ``s`` as magic, ASCII header, then little-endian float64 fields in x-fastest order."""
    header = [
        f"version={SNAPSHOT_VERSION}",
        f"nx={g.nx}",
        f"ny={g.ny}",
        f"nz={g.nz}",
        f"lx={g.lx!r}",
        f"ly={g.ly!r}",
        f"time={float(s.time)!r}",
        f"fields={','.join(State.FIELDS)}",
    ]
    if params is not None:
        for f in fields(PhysParams):
            v = getattr(params, f.name)
            if isinstance(v, float):
                header.append(f"param.{f.name}={v!r}")
    header.append("end")
    blob = MAGIC + b"\n" + ("\n".join(header) + "\n").encode("ascii")
    data = b"".join(np.asarray(a, dtype="<f8").tobytes(order="F") for a in s.fields())
    try:
        with open(path, "wb") as fh:
            fh.write(blob + data)
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


@dataclass(frozen=True)
class Snapshot:
    state: State
    grid: Grid
    params: dict[str, float]


def read_snapshot(path: str | os.PathLike) -> Snapshot:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc
    if not raw.startswith(MAGIC + b"\n"):
        raise SnapshotError(f"{path}: missing MPE1 magic")
    pos = len(MAGIC) + 1
    header: dict[str, str] = {}
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise SnapshotError(f"{path}: truncated header")
        line = raw[pos:nl].decode("ascii", errors="replace")
        pos = nl + 1
        if line == "end":
            break
        if "=" not in line:
            raise SnapshotError(f"{path}: malformed header line {line!r}")
        k, v = line.split("=", 1)
        header[k] = v
    try:
        version = int(header["version"])
    except (KeyError, ValueError) as exc:
        raise SnapshotError(f"{path}: missing or invalid version") from exc
    if version != SNAPSHOT_VERSION:
        raise VersionError(f"{path}: snapshot version {version}, expected {SNAPSHOT_VERSION}")
    try:
        g = make_grid(int(header["nx"]), int(header["ny"]), int(header["nz"]),
                      float(header["lx"]), float(header["ly"]))
        time = float(header["time"])
        names = header["fields"].split(",")
    except (KeyError, ValueError) as exc:
        raise SnapshotError(f"{path}: incomplete header ({exc})") from exc
    if tuple(names) != State.FIELDS:
        raise SnapshotError(f"{path}: unexpected field list {names}")
    count = int(np.prod(g.shape))
    need = pos + 8 * count * len(names)
    if len(raw) != need:
        raise SnapshotError(f"{path}: expected {need} bytes, found {len(raw)} (truncated or padded)")
    arrays = []
    for i in range(len(names)):
        chunk = np.frombuffer(raw, dtype="<f8", count=count, offset=pos + 8 * count * i)
        arrays.append(chunk.reshape(g.shape, order="F").astype(np.float64))
    params = {k[len("param."):]: float(v) for k, v in header.items() if k.startswith("param.")}
    return Snapshot(State(*arrays, time=time), g, params)


def load_snapshot(path: str | os.PathLike) -> State:
    return read_snapshot(path).state


# ---------------------------------------------------------------- manifests

def write_manifest(path: str | os.PathLike, items: Mapping[str, Any]) -> None:
    """Plain-text ``key=value`` lines in insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in items.items():
            fh.write(f"{k}={_format(v) if not isinstance(v, str) else v}\n")


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line and "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out
