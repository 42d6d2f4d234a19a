"""Single-letter rate constraints of the layered binning scheme.

The scheme transmits a source-component bin index, a common-codeword bin
index and an individual-codeword bin index; covering and packing impose
linear constraints on the five underlying rates.  This module computes the
constraint quantities, minimizes the transmitted total by linear
programming, evaluates the eliminated closed form of that minimum, and
builds feasible rate points with a safety margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import AuxChannel, JointSource, ONE_DISTORTION, compose
from .probability import entropy, mutual_information


@dataclass(frozen=True)
class SchemeRates:
    """The five rates of the layered scheme (bits/sample).

    ``r0``/``r1`` size the covering codebooks, ``r0p``/``r1p`` their bin
    counts, ``r2`` the source-component bins; only ``r2 + r0p + r1p`` is
    transmitted.
    """

    r2: float
    r0: float
    r0p: float
    r1: float
    r1p: float

    def __post_init__(self) -> None:
        for name in ("r2", "r0", "r0p", "r1", "r1p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.r0p > self.r0 + 1e-12:
            raise ValueError("r0p must not exceed r0")
        if self.r1p > self.r1 + 1e-12:
            raise ValueError("r1p must not exceed r1")

    @property
    def total(self) -> float:
        return self.r2 + self.r0p + self.r1p

    def scaled_transmitted(self, target_total: float) -> "SchemeRates":
        """Shrink only the transmitted components to hit ``target_total``,
        keeping the covering codebooks as they are."""
        if self.total <= 0:
            raise ValueError("cannot rescale a zero-rate point")
        t = target_total / self.total
        return SchemeRates(
            r2=self.r2 * t,
            r0=self.r0,
            r0p=min(self.r0p * t, self.r0),
            r1=self.r1,
            r1p=min(self.r1p * t, self.r1),
        )


@dataclass(frozen=True)
class SchemeQuantities:
    """Exact single-letter quantities the constraints are written in."""

    cover0: float  # I(U0; S1 | S2)
    cover1: float  # I(U1; S1 | U0, S2)
    bin0_y1: float  # I(U0; Y1 | S2)
    bin0_y2: float  # I(U0; Y2 | S2)
    bin1_y1: float  # I(U1; Y1 | U0, S2)
    h_s2_y1: float  # H(S2 | Y1)
    h_s2_y2: float  # H(S2 | Y2)


def scheme_quantities(
    source: JointSource, channel: AuxChannel
) -> SchemeQuantities:
    if channel.kind != ONE_DISTORTION:
        raise ValueError("the layered scheme simulates (U0, U1) channels")
    p = compose(source, channel).pmf
    return SchemeQuantities(
        cover0=mutual_information(p, {"U0"}, {"S1"}, {"S2"}),
        cover1=mutual_information(p, {"U1"}, {"S1"}, {"U0", "S2"}),
        bin0_y1=mutual_information(p, {"U0"}, {"Y1"}, {"S2"}),
        bin0_y2=mutual_information(p, {"U0"}, {"Y2"}, {"S2"}),
        bin1_y1=mutual_information(p, {"U1"}, {"Y1"}, {"U0", "S2"}),
        h_s2_y1=entropy(p, {"S2"}, {"Y1"}),
        h_s2_y2=entropy(p, {"S2"}, {"Y2"}),
    )


def lp_minimum_total(q: SchemeQuantities) -> tuple[float, SchemeRates]:
    """Minimum transmitted total over the constraint polytope, by LP."""
    # variables x = (r2, r0, r0p, r1, r1p)
    c = [1.0, 0.0, 1.0, 0.0, 1.0]
    a_ub = [
        [0, -1, 0, 0, 0],  # r0 >= cover0
        [0, 0, 0, -1, 0],  # r1 >= cover1
        [0, 1, -1, 0, 0],  # r0 - r0p <= bin0_y2
        [-1, 1, -1, 0, 0],  # r0 - r0p - r2 <= bin0_y2 - h(s2|y2)
        [0, 1, -1, 0, 0],  # r0 - r0p <= bin0_y1
        [-1, 1, -1, 0, 0],  # r0 - r0p - r2 <= bin0_y1 - h(s2|y1)
        [0, 0, 0, 1, -1],  # r1 - r1p <= bin1_y1
        [0, -1, 1, 0, 0],  # r0p <= r0
        [0, 0, 0, -1, 1],  # r1p <= r1
    ]
    b_ub = [
        -q.cover0,
        -q.cover1,
        q.bin0_y2,
        q.bin0_y2 - q.h_s2_y2,
        q.bin0_y1,
        q.bin0_y1 - q.h_s2_y1,
        q.bin1_y1,
        0.0,
        0.0,
    ]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(0, None)] * 5, method="highs")
    if not res.success:  # pragma: no cover - polytope is always nonempty
        raise RuntimeError(f"rate-region LP failed: {res.message}")
    r2, r0, r0p, r1, r1p = (max(v, 0.0) for v in res.x)
    return float(res.fun), SchemeRates(r2, r0, min(r0p, r0), r1, min(r1p, r1))


def eliminated_total(source: JointSource, channel: AuxChannel) -> float:
    """The closed form the constraint elimination yields for the minimum
    transmitted total, computed directly from the composed joint."""
    p = compose(source, channel).pmf
    return max(
        mutual_information(p, {"U0"}, {"S1"}, {"S2", "Y1"})
        + entropy(p, {"S2"}, {"Y1"}),
        mutual_information(p, {"U0"}, {"S1"}, {"S2", "Y2"})
        + entropy(p, {"S2"}, {"Y2"}),
    ) + mutual_information(p, {"U1"}, {"S1"}, {"U0", "S2", "Y1"})


def margin_rates(
    source: JointSource, channel: AuxChannel, delta: float
) -> SchemeRates:
    """A feasible rate point with margin ``delta`` on every constraint that
    can carry one.

    Packing constraints whose right side is zero are saturated by singleton
    bins (bin count equal to codebook size), which removes the corresponding
    decoding ambiguity instead of suppressing it exponentially.
    """
    q = scheme_quantities(source, channel)
    r0 = q.cover0 + delta
    r1 = q.cover1 + delta
    r0p = float(np.clip(r0 - min(q.bin0_y1, q.bin0_y2) + delta, 0.0, r0))
    r1p = float(np.clip(r1 - q.bin1_y1 + delta, 0.0, r1))
    r2 = max(
        (r0 - r0p) - q.bin0_y2 + q.h_s2_y2,
        (r0 - r0p) - q.bin0_y1 + q.h_s2_y1,
        0.0,
    ) + delta
    return SchemeRates(r2, r0, r0p, r1, r1p)
