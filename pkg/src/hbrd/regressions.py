"""Built-in regression checks over the bundled fixture files.

Each check compares a computed quantity against a pinned expected value at a
fixed tolerance.  The checks read the fixture JSON from disk, so a tampered
fixture shows up as a named failure.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .model import (
    LOSSLESS,
    ONE_DISTORTION,
    AuxChannel,
    JointSource,
    channel_from_table,
    constant_channel,
)
from .probability import random_cond_pmf, random_pmf, Pmf
from .rates import (
    CaseTag,
    HypothesisError,
    closed_form,
    eval_lossless,
    eval_one_distortion,
    eval_one_distortion_forms,
    eval_common_reconstruction,
)
from .model import DistortionSpec, hamming

# pinned fixture values (computed by direct enumeration over the bundled
# dyadic sources)
Y1_ABSENT_RATE = 1.811278124459133
Y2_ABSENT_RATE = 1.4588043351241722
FUNCTIONAL_Y2_RATE = 2.7169171866886996


@dataclass(frozen=True)
class CheckResult:
    name: str
    expected: float
    actual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.actual - self.expected) <= self.tolerance


def _load(fixtures: Path, name: str) -> cfgmod.ProblemConfig:
    return cfgmod.load_config(fixtures / f"{name}.json")


def _load_channel(fixtures: Path, name: str) -> AuxChannel:
    return cfgmod.load_channel(fixtures / f"{name}.json")


def _embedded_copy_channel(base: AuxChannel, n2: int) -> AuxChannel:
    """Extend a ``(U0, U1)`` channel with a shared reconstruction that copies
    the second source component."""
    probs = base.cond.probs
    n1 = probs.shape[0]
    ext = np.zeros(probs.shape + (n2,))
    for s2 in range(n2):
        ext[:, s2, :, :, s2] = probs[:, s2, :, :]
    return channel_from_table("common_reconstruction", ext)


def run_checks(fixtures: Path) -> list[CheckResult]:
    checks: list[CheckResult] = []

    def add(name: str, expected: float, actual: float, tol: float) -> None:
        checks.append(CheckResult(name, float(expected), float(actual), tol))

    ex1 = _load(fixtures, "example1")
    for tag, expected in (("empty", 3.0), ("s1", 3.0), ("x3", 2.0)):
        channel = _load_channel(fixtures, f"channel_u0_{tag}")
        add(
            f"example1 lossless rate, U0={tag}",
            expected,
            eval_lossless(ex1.source, channel),
            1e-12,
        )

    for tag, expected in (("u0_empty_u1_s1", 3.0), ("u0_x3_u1_x1", 2.0)):
        channel = _load_channel(fixtures, f"channel_{tag}")
        rb = eval_one_distortion(ex1.source, channel, ex1.distortion.d1, ex1.D1)
        add(f"example1 layered rate, {tag}", expected, rb.rate, 1e-12)
        add(f"example1 distortion, {tag}", 0.0, rb.distortion1, 1e-12)
        layered, merged = eval_one_distortion_forms(ex1.source, channel)
        add(f"example1 form agreement, {tag}", 0.0, layered - merged, 1e-10)

    comp = _load(fixtures, "comp_delivery")
    add(
        "complementary delivery, optimal common layer",
        1.0,
        closed_form(comp.source, CaseTag.COMP_DELIVERY).value,
        1e-12,
    )
    add(
        "complementary delivery, constant common layer",
        2.0,
        eval_lossless(
            comp.source, constant_channel(LOSSLESS, comp.source.sizes[:2])
        ),
        1e-12,
    )

    y1a = _load(fixtures, "y1_absent")
    add(
        "decoder-1 side information absent",
        Y1_ABSENT_RATE,
        closed_form(y1a.source, CaseTag.Y1_ABSENT).value,
        1e-9,
    )
    y2a = _load(fixtures, "y2_absent")
    add(
        "decoder-2 side information absent",
        Y2_ABSENT_RATE,
        closed_form(y2a.source, CaseTag.Y2_ABSENT).value,
        1e-9,
    )
    fy2 = _load(fixtures, "functional_y2")
    add(
        "decoder-2 side information a function of S2",
        FUNCTIONAL_Y2_RATE,
        closed_form(fy2.source, CaseTag.FUNC_Y2_LOSSLESS).value,
        1e-9,
    )

    deg = _load(fixtures, "degraded_bsc")
    from .probability import entropy

    expected_deg = entropy(deg.source.pmf, {"S2"}, {"Y2"}) + entropy(
        deg.source.pmf, {"S1"}, {"S2", "Y1"}
    )
    add(
        "degraded chain, lossless closed form",
        expected_deg,
        closed_form(deg.source, CaseTag.DEGRADED_LOSSLESS).value,
        1e-12,
    )

    # the degraded closed form must refuse non-degraded side information
    try:
        closed_form(ex1.source, CaseTag.DEGRADED_LOSSLESS)
        rejected = 0.0
    except HypothesisError:
        rejected = 1.0
    add("degradedness check rejects example1", 1.0, rejected, 0.0)

    # the two rate forms agree on random channels
    rng = np.random.default_rng(20240809)
    worst = 0.0
    for _ in range(20):
        src = JointSource(random_pmf(("S1", "S2", "Y1", "Y2"), (2, 2, 2, 2), rng))
        ch = AuxChannel(
            ONE_DISTORTION,
            random_cond_pmf(("S1", "S2"), (2, 2), ("U0", "U1"), (2, 2), rng),
        )
        layered, merged = eval_one_distortion_forms(src, ch)
        worst = max(worst, abs(layered - merged))
    add("form agreement on random channels", 0.0, worst, 1e-10)

    # shared-reconstruction evaluation degenerates to the exact-recovery one
    worst = 0.0
    d1 = hamming(2)
    d2 = hamming(2)
    for _ in range(10):
        src = JointSource(random_pmf(("S1", "S2", "Y1", "Y2"), (2, 2, 2, 2), rng))
        base = AuxChannel(
            ONE_DISTORTION,
            random_cond_pmf(("S1", "S2"), (2, 2), ("U0", "U1"), (2, 2), rng),
        )
        r1 = eval_one_distortion(src, base, d1, 0.25)
        r3 = eval_common_reconstruction(
            src, _embedded_copy_channel(base, 2), DistortionSpec(d1, d2), 0.25, 0.0
        )
        worst = max(worst, abs(r1.rate - r3.rate))
    add("shared-reconstruction degeneration", 0.0, worst, 1e-12)

    return checks
