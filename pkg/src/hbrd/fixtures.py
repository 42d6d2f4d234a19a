"""Built-in test sources and channels, plus the bundled JSON fixture files.

All probabilities are exact dyadics so float arithmetic reproduces the
closed-form rate values bit-exactly.  ``write_all`` regenerates the JSON
files shipped under ``hbrd/data``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (
    LOSSLESS,
    ONE_DISTORTION,
    AuxChannel,
    JointSource,
    deterministic_channel,
    constant_channel,
)
from .probability import Pmf


def four_bit_example() -> JointSource:
    """Four independent fair bits ``(x1, x2, x3, x4)`` packed as
    ``S1 = (x1, x3)``, ``S2 = (x2, x4)``, ``Y1 = (x1, x2, x4)``, ``Y2 = x3``."""
    probs = np.zeros((4, 4, 8, 2))
    for x1 in range(2):
        for x2 in range(2):
            for x3 in range(2):
                for x4 in range(2):
                    s1 = 2 * x1 + x3
                    s2 = 2 * x2 + x4
                    y1 = 4 * x1 + 2 * x2 + x4
                    y2 = x3
                    probs[s1, s2, y1, y2] = 1.0 / 16.0
    return JointSource(Pmf(("S1", "S2", "Y1", "Y2"), probs))


def four_bit_u0_channels() -> dict[str, AuxChannel]:
    """The three common-layer choices studied on the four-bit example."""
    return {
        "empty": constant_channel(LOSSLESS, (4, 4)),
        "s1": deterministic_channel(LOSSLESS, (4, 4), (4,), lambda s1, s2: s1),
        "x3": deterministic_channel(LOSSLESS, (4, 4), (2,), lambda s1, s2: s1 & 1),
    }


def four_bit_full_channels() -> dict[str, AuxChannel]:
    """``(U0, U1)`` channels matching the two lossless strategies."""
    return {
        "u0_empty_u1_s1": deterministic_channel(
            ONE_DISTORTION, (4, 4), (1, 4), lambda s1, s2: (0, s1)
        ),
        "u0_x3_u1_x1": deterministic_channel(
            ONE_DISTORTION, (4, 4), (2, 2), lambda s1, s2: (s1 & 1, s1 >> 1)
        ),
    }


def comp_delivery_source() -> JointSource:
    """Independent fair bits with each decoder holding the other's target."""
    probs = np.zeros((2, 2, 2, 2))
    for s1 in range(2):
        for s2 in range(2):
            probs[s1, s2, s2, s1] = 0.25
    return JointSource(Pmf(("S1", "S2", "Y1", "Y2"), probs))


def _binary_chain(p_flip_s2: float, p_flip_y1: float, p_flip_y2: float) -> np.ndarray:
    """``s1`` fair bit, ``s2 = s1 + noise``, ``y1 = s1 + noise``,
    ``y2 = y1 + noise`` (all flips independent)."""
    probs = np.zeros((2, 2, 2, 2))
    for s1 in range(2):
        for s2 in range(2):
            p2 = p_flip_s2 if s2 != s1 else 1 - p_flip_s2
            for y1 in range(2):
                p3 = p_flip_y1 if y1 != s1 else 1 - p_flip_y1
                for y2 in range(2):
                    p4 = p_flip_y2 if y2 != y1 else 1 - p_flip_y2
                    probs[s1, s2, y1, y2] = 0.5 * p2 * p3 * p4
    return probs


def degraded_bsc_source() -> JointSource:
    """Side informations forming a physically degraded chain toward the
    sources (``y2`` is a noisier copy of ``y1``)."""
    return JointSource(
        Pmf(("S1", "S2", "Y1", "Y2"), _binary_chain(0.25, 0.125, 0.125))
    )


def y2_absent_source() -> JointSource:
    probs = _binary_chain(0.25, 0.125, 0.0)
    # collapse y2 to a single constant symbol
    collapsed = probs.sum(axis=3, keepdims=True)
    return JointSource(Pmf(("S1", "S2", "Y1", "Y2"), collapsed))


def y1_absent_source() -> JointSource:
    probs = np.zeros((2, 2, 1, 2))
    for s1 in range(2):
        for s2 in range(2):
            p12 = 0.5 * (0.75 if s2 == s1 else 0.25)
            for y2 in range(2):
                p4 = 0.875 if y2 == s2 else 0.125
                probs[s1, s2, 0, y2] = p12 * p4
    return JointSource(Pmf(("S1", "S2", "Y1", "Y2"), probs))


def functional_y2_source() -> JointSource:
    """``y2`` is the parity of the four-valued ``s2``; ``y1`` is a noisy
    view of the binary ``s1``."""
    p_s1s2 = np.array(
        [
            [0.125, 0.125, 0.0625, 0.1875],
            [0.1875, 0.0625, 0.125, 0.125],
        ]
    )
    probs = np.zeros((2, 4, 2, 2))
    for s1 in range(2):
        for s2 in range(4):
            for y1 in range(2):
                p3 = 0.75 if y1 == s1 else 0.25
                probs[s1, s2, y1, s2 & 1] = p_s1s2[s1, s2] * p3
    return JointSource(Pmf(("S1", "S2", "Y1", "Y2"), probs))


SOURCES = {
    "example1": four_bit_example,
    "comp_delivery": comp_delivery_source,
    "degraded_bsc": degraded_bsc_source,
    "y2_absent": y2_absent_source,
    "y1_absent": y1_absent_source,
    "functional_y2": functional_y2_source,
}


# --------------------------------------------------------------------------
# JSON fixture files
# --------------------------------------------------------------------------


def _source_config(name: str, source: JointSource, extra: dict) -> dict:
    n1, n2, m1, m2 = source.sizes
    cfg = {
        "name": name,
        "kind": "one_distortion",
        "alphabets": {"S1": n1, "S2": n2, "Y1": m1, "Y2": m2},
        "axis_order": ["S1", "S2", "Y1", "Y2"],
        "source_pmf": source.pmf.probs.ravel().tolist(),
        "D1": 0.0,
    }
    cfg.update(extra)
    return cfg


def _channel_json(channel: AuxChannel) -> dict:
    cond = channel.cond
    sizes = dict(zip(cond.given_names + cond.output_names, cond.probs.shape))
    return {
        "kind": channel.kind,
        "given_axes": list(cond.given_names),
        "output_axes": list(cond.output_names),
        "cardinalities": sizes,
        "probs": cond.probs.ravel().tolist(),
    }


def _example1_extra() -> dict:
    return {
        "optimizer": {
            "u0_card": 2,
            "u1_card": 2,
            "grid_step": "1/1",
            "restarts": 64,
            "max_iters": 60,
            "seed": 20240801,
            "tolerance": 1e-6,
        },
        "simulator": {
            "n": 8,
            "rates": {"R2": 1.5, "R0": 1.5, "R0p": 1.5, "R1": 1.5, "R1p": 1.0},
            "epsilon": 0.4,
            "typicality": "absolute",
            "trials": 10000,
            "seed": 7,
            "regen_every": 1,
        },
    }


def write_all(directory: str | Path) -> list[Path]:
    """Regenerate every bundled JSON fixture under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name: str, payload: dict) -> None:
        path = directory / f"{name}.json"
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        written.append(path)

    for name, builder in SOURCES.items():
        extra = _example1_extra() if name == "example1" else {}
        dump(name, _source_config(name, builder(), extra))

    for tag, channel in four_bit_u0_channels().items():
        dump(f"channel_u0_{tag}", _channel_json(channel))
    for tag, channel in four_bit_full_channels().items():
        dump(f"channel_{tag}", _channel_json(channel))
    return written


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture file (without the ``.json`` suffix)."""
    ref = resources.files("hbrd").joinpath("data", f"{name}.json")
    with resources.as_file(ref) as path:
        return Path(path)
