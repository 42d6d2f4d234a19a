"""JSON problem-config and channel-file parsing.

The on-disk format uses explicit ``axis_order`` arrays and flat row-major
probability lists so byte ordering is documented inside the file itself.
Parsed pmfs may drift from exact normalization by at most ``1e-9`` and are
renormalized exactly; anything worse is rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .model import (
    COMMON_RECONSTRUCTION,
    LOSSLESS,
    ONE_DISTORTION,
    AuxChannel,
    DistortionSpec,
    JointSource,
    channel_from_table,
    hamming,
)
from .optimize import SearchConfig
from .probability import Pmf
from .rate_region import SchemeRates

NORMALIZATION_TOL = 1e-9
SOURCE_ORDER = ["S1", "S2", "Y1", "Y2"]

_CHANNEL_KINDS = {
    ("U0",): LOSSLESS,
    ("U0", "U1"): ONE_DISTORTION,
    ("U0", "U1", "S2hat"): COMMON_RECONSTRUCTION,
}


class ConfigError(ValueError):
    """Malformed or inconsistent input file."""


_REQUIRED = object()


def _get(obj: dict, key: str, kind, where: str, default=_REQUIRED):
    if key not in obj:
        if default is not _REQUIRED:
            return default
        raise ConfigError(f"{where}: missing required field {key!r}")
    value = obj[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _parse_probs(values, shape, where: str) -> np.ndarray:
    cells = int(np.prod(shape))
    if not isinstance(values, list) or len(values) != cells:
        raise ConfigError(
            f"{where}: expected a flat list of {cells} probabilities "
            f"for shape {tuple(shape)}, got "
            f"{len(values) if isinstance(values, list) else type(values).__name__}"
        )
    arr = np.asarray(values, dtype=float).reshape(shape)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}: probabilities must be finite and >= 0")
    return arr


@dataclass(frozen=True)
class SimulatorSettings:
    n: int
    rates: SchemeRates
    epsilon: float
    typicality: str
    trials: int
    seed: int
    regen_every: int = 1


@dataclass(frozen=True)
class ProblemConfig:
    name: str
    kind: str
    source: JointSource
    distortion: DistortionSpec
    D1: float
    D2: float | None
    search: SearchConfig
    simulator: SimulatorSettings | None = None


def parse_grid_step(value, where: str) -> Fraction:
    if isinstance(value, str):
        try:
            step = Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where}: bad grid_step {value!r}: {exc}") from None
    elif isinstance(value, (int, float)):
        step = Fraction(value).limit_denominator(10**6)
    else:
        raise ConfigError(f"{where}: grid_step must be a string or number")
    if step.numerator != 1 or not (0 < step <= 1):
        raise ConfigError(f"{where}: grid_step must be 1/k, got {value!r}")
    return step


def _parse_search(obj: dict, where: str) -> SearchConfig:
    kwargs = {}
    for key in ("u0_card", "u1_card", "s2hat_card", "restarts", "max_iters",
                "seed", "budget"):
        if key in obj:
            kwargs[key] = _get(obj, key, int, where)
    if "tolerance" in obj:
        kwargs["tolerance"] = _get(obj, "tolerance", float, where)
    if "grid_step" in obj:
        kwargs["grid_step"] = parse_grid_step(obj["grid_step"], where)
    try:
        return SearchConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_simulator(obj: dict, where: str) -> SimulatorSettings:
    rates_obj = _get(obj, "rates", dict, where)
    try:
        rates = SchemeRates(
            r2=float(_get(rates_obj, "R2", (int, float), f"{where}.rates")),
            r0=float(_get(rates_obj, "R0", (int, float), f"{where}.rates")),
            r0p=float(_get(rates_obj, "R0p", (int, float), f"{where}.rates")),
            r1=float(_get(rates_obj, "R1", (int, float), f"{where}.rates")),
            r1p=float(_get(rates_obj, "R1p", (int, float), f"{where}.rates")),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}.rates: {exc}") from None
    typicality = _get(obj, "typicality", str, where, default="relative")
    if typicality not in ("relative", "absolute"):
        raise ConfigError(
            f"{where}.typicality: must be 'relative' or 'absolute', "
            f"got {typicality!r}"
        )
    return SimulatorSettings(
        n=_get(obj, "n", int, where),
        rates=rates,
        epsilon=float(_get(obj, "epsilon", (int, float), where)),
        typicality=typicality,
        trials=_get(obj, "trials", int, where),
        seed=_get(obj, "seed", int, where),
        regen_every=_get(obj, "regen_every", int, where, default=1),
    )


def parse_config(obj: dict, where: str = "config") -> ProblemConfig:
    kind = _get(obj, "kind", str, where, default=ONE_DISTORTION)
    if kind not in (ONE_DISTORTION, COMMON_RECONSTRUCTION):
        raise ConfigError(
            f"{where}.kind: must be {ONE_DISTORTION!r} or "
            f"{COMMON_RECONSTRUCTION!r}, got {kind!r}"
        )
    alphabets = _get(obj, "alphabets", dict, where)
    sizes = []
    for axis in SOURCE_ORDER:
        size = _get(alphabets, axis, int, f"{where}.alphabets")
        if size < 1:
            raise ConfigError(f"{where}.alphabets.{axis}: must be >= 1")
        sizes.append(size)
    order = _get(obj, "axis_order", list, where, default=SOURCE_ORDER)
    if order != SOURCE_ORDER:
        raise ConfigError(
            f"{where}.axis_order: must be {SOURCE_ORDER} (row-major layout)"
        )
    raw = _parse_probs(_get(obj, "source_pmf", list, where), sizes,
                       f"{where}.source_pmf")
    total = float(raw.sum())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ConfigError(
            f"{where}.source_pmf: sums to {total!r}; normalization is off by "
            f"more than {NORMALIZATION_TOL}"
        )
    source = JointSource(Pmf(tuple(SOURCE_ORDER), raw / total))

    n1, n2 = sizes[0], sizes[1]
    if "d1" in obj and obj["d1"] is not None:
        d1_obj = _get(obj, "d1", dict, where)
        s1hat = _get(d1_obj, "S1hat", int, f"{where}.d1", default=n1)
        d1 = np.asarray(
            _parse_probs(_get(d1_obj, "table", list, f"{where}.d1"),
                         (n1, s1hat), f"{where}.d1.table")
        )
    else:
        d1 = hamming(n1)
    d2 = None
    if obj.get("d2") is not None:
        d2_obj = _get(obj, "d2", dict, where)
        s2hat = _get(d2_obj, "S2hat", int, f"{where}.d2", default=n2)
        d2 = np.asarray(
            _parse_probs(_get(d2_obj, "table", list, f"{where}.d2"),
                         (n2, s2hat), f"{where}.d2.table")
        )
    elif kind == COMMON_RECONSTRUCTION:
        d2 = hamming(n2)

    search = _parse_search(obj.get("optimizer", {}), f"{where}.optimizer")
    simulator = None
    if obj.get("simulator") is not None:
        simulator = _parse_simulator(obj["simulator"], f"{where}.simulator")

    D2 = obj.get("D2")
    return ProblemConfig(
        name=_get(obj, "name", str, where, default=""),
        kind=kind,
        source=source,
        distortion=DistortionSpec(d1, d2),
        D1=float(_get(obj, "D1", (int, float), where, default=0.0)),
        D2=None if D2 is None else float(D2),
        search=search,
        simulator=simulator,
    )


def parse_channel(obj: dict, where: str = "channel") -> AuxChannel:
    given = tuple(_get(obj, "given_axes", list, where))
    outputs = tuple(_get(obj, "output_axes", list, where))
    if given != ("S1", "S2"):
        raise ConfigError(f"{where}.given_axes: must be ['S1', 'S2']")
    if outputs not in _CHANNEL_KINDS:
        raise ConfigError(
            f"{where}.output_axes: must be one of "
            f"{[list(k) for k in _CHANNEL_KINDS]}, got {list(outputs)}"
        )
    kind = _CHANNEL_KINDS[outputs]
    declared = obj.get("kind")
    if declared is not None and declared != kind:
        raise ConfigError(
            f"{where}.kind: {declared!r} does not match output axes {list(outputs)}"
        )
    cards = _get(obj, "cardinalities", dict, where)
    shape = tuple(
        _get(cards, axis, int, f"{where}.cardinalities")
        for axis in given + outputs
    )
    probs = _parse_probs(_get(obj, "probs", list, where), shape, f"{where}.probs")
    slice_axes = tuple(range(2, probs.ndim))
    sums = probs.sum(axis=slice_axes)
    if np.any(np.abs(sums - 1.0) > NORMALIZATION_TOL):
        worst = float(np.abs(sums - 1.0).max())
        raise ConfigError(
            f"{where}.probs: conditional slices are off normalization by "
            f"{worst:.3e} (> {NORMALIZATION_TOL})"
        )
    probs = probs / sums.reshape(sums.shape + (1,) * len(slice_axes))
    try:
        return channel_from_table(kind, probs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def channel_to_json(channel: AuxChannel) -> dict:
    cond = channel.cond
    return {
        "kind": channel.kind,
        "given_axes": list(cond.given_names),
        "output_axes": list(cond.output_names),
        "cardinalities": dict(
            zip(cond.given_names + cond.output_names, map(int, cond.probs.shape))
        ),
        "probs": cond.probs.ravel().tolist(),
    }


def load_json(path: str | Path, where: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{where}: cannot read {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{where}: invalid JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: top level must be a JSON object")
    return obj


def load_config(path: str | Path) -> ProblemConfig:
    return parse_config(load_json(path, str(path)), where=str(path))


def load_channel(path: str | Path) -> AuxChannel:
    return parse_channel(load_json(path, str(path)), where=str(path))
