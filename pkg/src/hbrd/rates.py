"""Rate evaluators for a fixed auxiliary channel, closed-form special cases,
and the two classical single-decoder baselines.

The central quantity is the description rate needed so that both decoders
recover the second source component (exactly, or as a shared compressed
version) while decoder 1 additionally reconstructs the first component to
within a distortion target.  For a fixed auxiliary channel the rate is
``max(term_decoder1, term_decoder2) + individual_layer``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import (
    COMMON_RECONSTRUCTION,
    LOSSLESS,
    ONE_DISTORTION,
    AuxChannel,
    DistortionSpec,
    FullJoint,
    JointSource,
    compose,
    constant_channel,
    deterministic_channel,
    optimal_phi,
    expected_d2,
)
from .probability import (
    CondPmf,
    Pmf,
    coupled_information,
    entropy,
    mutual_information,
)

FEASIBILITY_SLACK = 1e-12
HYPOTHESIS_TOL = 1e-9


class HypothesisError(ValueError):
    """A closed-form case was requested on a source violating its structure."""


@dataclass(frozen=True)
class RateBreakdown:
    """Rate of one channel, split into its decoder terms and the extra layer
    decoded only by decoder 1, together with the realized distortions."""

    rate: float
    term_decoder1: float
    term_decoder2: float
    individual_layer: float
    distortion1: float
    distortion2: float | None
    feasible: bool


def _max_terms(joint: FullJoint, common: set[str]) -> tuple[float, float]:
    t1 = coupled_information(joint.pmf, common, {"S1", "S2"}, {"Y1"})
    t2 = coupled_information(joint.pmf, common, {"S1", "S2"}, {"Y2"})
    return t1, t2


def eval_one_distortion(
    source: JointSource,
    channel: AuxChannel,
    d1: np.ndarray,
    D1: float,
) -> RateBreakdown:
    """Rate of a ``(U0, U1)`` channel for the problem where both decoders
    recover the second component losslessly.

    The decoder terms describe the common layer ``(U0, S2)`` against each
    side information; the individual layer carries ``U1`` to decoder 1 only.
    """
    if channel.kind != ONE_DISTORTION:
        raise ValueError(f"need a {ONE_DISTORTION} channel, got {channel.kind}")
    joint = compose(source, channel)
    t1, t2 = _max_terms(joint, {"U0", "S2"})
    layer = mutual_information(
        joint.pmf, {"U1"}, {"S1"}, {"U0", "S2", "Y1"}
    )
    _, dist = optimal_phi(joint, d1)
    return RateBreakdown(
        rate=max(t1, t2) + layer,
        term_decoder1=t1,
        term_decoder2=t2,
        individual_layer=layer,
        distortion1=dist,
        distortion2=None,
        feasible=dist <= D1 + FEASIBILITY_SLACK,
    )


def eval_one_distortion_forms(
    source: JointSource, channel: AuxChannel
) -> tuple[float, float]:
    """The two algebraically equivalent writings of the same rate.

    The first keeps the individual layer inside the decoder-2 branch; the
    second merges the common terms and adds the layer outside the max.  They
    agree for every valid channel.
    """
    if channel.kind != ONE_DISTORTION:
        raise ValueError(f"need a {ONE_DISTORTION} channel, got {channel.kind}")
    joint = compose(source, channel)
    p = joint.pmf
    layer = mutual_information(p, {"U1"}, {"S1"}, {"U0", "S2", "Y1"})
    layered = max(
        entropy(p, {"S2"}, {"Y1"})
        + coupled_information(p, {"U0", "U1"}, {"S1"}, {"S2", "Y1"}),
        entropy(p, {"S2"}, {"Y2"})
        + mutual_information(p, {"U0"}, {"S1"}, {"S2", "Y2"})
        + layer,
    )
    t1, t2 = _max_terms(joint, {"U0", "S2"})
    merged = max(t1, t2) + layer
    return layered, merged


def eval_lossless_terms(
    source: JointSource, channel: AuxChannel
) -> tuple[float, float]:
    """The two decoder terms of the all-lossless rate for a fixed ``U0``
    channel; the rate is their maximum."""
    if channel.kind != LOSSLESS:
        raise ValueError(f"need a {LOSSLESS} channel, got {channel.kind}")
    p = compose(source, channel).pmf
    t1 = entropy(p, {"S1", "S2"}, {"Y1"})
    t2 = (
        entropy(p, {"S1", "S2"}, {"Y2"})
        + entropy(p, {"S1"}, {"Y1", "S2", "U0"})
        - entropy(p, {"S1"}, {"Y2", "S2", "U0"})
    )
    return t1, t2


def eval_lossless(source: JointSource, channel: AuxChannel) -> float:
    """Minimum-rate expression when decoder 1 recovers both components and
    decoder 2 recovers the second component, all losslessly, for a fixed
    ``U0`` channel."""
    return max(eval_lossless_terms(source, channel))


def eval_common_reconstruction(
    source: JointSource,
    channel: AuxChannel,
    distortion: DistortionSpec,
    D1: float,
    D2: float,
) -> RateBreakdown:
    """Rate of a ``(U0, U1, S2hat)`` channel when all terminals share the
    compressed version of the second component.

    The shared reconstruction is produced without looking at any side
    information, so its distortion is a plain expectation over the channel.
    """
    if channel.kind != COMMON_RECONSTRUCTION:
        raise ValueError(
            f"need a {COMMON_RECONSTRUCTION} channel, got {channel.kind}"
        )
    if distortion.d2 is None:
        raise ValueError("common-reconstruction evaluation needs a d2 table")
    joint = compose(source, channel)
    t1, t2 = _max_terms(joint, {"U0", "S2hat"})
    layer = mutual_information(
        joint.pmf, {"U1"}, {"S1", "S2"}, {"Y1", "S2hat", "U0"}
    )
    _, dist1 = optimal_phi(joint, distortion.d1)
    dist2 = expected_d2(joint, distortion.d2)
    return RateBreakdown(
        rate=max(t1, t2) + layer,
        term_decoder1=t1,
        term_decoder2=t2,
        individual_layer=layer,
        distortion1=dist1,
        distortion2=dist2,
        feasible=(
            dist1 <= D1 + FEASIBILITY_SLACK and dist2 <= D2 + FEASIBILITY_SLACK
        ),
    )


# --------------------------------------------------------------------------
# closed-form special cases
# --------------------------------------------------------------------------


class CaseTag(enum.Enum):
    """Side-information structures admitting a closed-form minimum."""

    DEGRADED = "Degraded"
    DEGRADED_LOSSLESS = "DegradedLossless"
    REVERSE_DEGRADED = "ReverseDegraded"
    REVERSE_DEGRADED_LOSSLESS = "ReverseDegradedLossless"
    Y2_ABSENT = "Y2Absent"
    Y1_ABSENT = "Y1Absent"
    FUNC_Y2_LOSSY = "FuncY2Lossy"
    FUNC_Y2_LOSSLESS = "FuncY2Lossless"
    FUNC_Y1_LOSSLESS = "FuncY1Lossless"
    COMP_DELIVERY = "CompDelivery"


_LOSSY_CASES = {
    CaseTag.DEGRADED,
    CaseTag.REVERSE_DEGRADED,
    CaseTag.FUNC_Y2_LOSSY,
}

# cases where a specific common-layer choice attains the minimum
_U0_CHOICE = {
    CaseTag.DEGRADED: "constant",
    CaseTag.DEGRADED_LOSSLESS: "constant",
    CaseTag.Y2_ABSENT: "constant",
    CaseTag.FUNC_Y2_LOSSY: "constant",
    CaseTag.FUNC_Y2_LOSSLESS: "constant",
    CaseTag.FUNC_Y1_LOSSLESS: "copy_s1",
    CaseTag.COMP_DELIVERY: "copy_s1",
}


@dataclass(frozen=True)
class ClosedFormResult:
    case: CaseTag
    value: float
    u0_choice: str | None


def check_case_hypothesis(source: JointSource, case: CaseTag) -> None:
    """Raise :class:`HypothesisError` naming the violated structural check."""
    p = source.pmf

    def _markov(a: str, b: str) -> None:
        defect = mutual_information(p, {a}, {"S1", "S2"}, {b})
        if defect > HYPOTHESIS_TOL:
            raise HypothesisError(
                f"{case.value} needs the chain {a} -- {b} -- (S1,S2); "
                f"I({a}; S1,S2 | {b}) = {defect:.3e}"
            )

    if case in (CaseTag.DEGRADED, CaseTag.DEGRADED_LOSSLESS):
        _markov("Y2", "Y1")
    elif case in (CaseTag.REVERSE_DEGRADED, CaseTag.REVERSE_DEGRADED_LOSSLESS):
        _markov("Y1", "Y2")
    elif case == CaseTag.Y2_ABSENT:
        defect = mutual_information(p, {"Y2"}, {"S1", "S2", "Y1"})
        if defect > HYPOTHESIS_TOL:
            raise HypothesisError(
                f"{case.value} needs Y2 uninformative; "
                f"I(Y2; S1,S2,Y1) = {defect:.3e}"
            )
    elif case == CaseTag.Y1_ABSENT:
        defect = mutual_information(p, {"Y1"}, {"S1", "S2", "Y2"})
        if defect > HYPOTHESIS_TOL:
            raise HypothesisError(
                f"{case.value} needs Y1 uninformative; "
                f"I(Y1; S1,S2,Y2) = {defect:.3e}"
            )
    elif case in (CaseTag.FUNC_Y2_LOSSY, CaseTag.FUNC_Y2_LOSSLESS):
        defect = entropy(p, {"Y2"}, {"S2"})
        if defect > HYPOTHESIS_TOL:
            raise HypothesisError(
                f"{case.value} needs Y2 to be a function of S2; "
                f"H(Y2 | S2) = {defect:.3e}"
            )
    elif case == CaseTag.FUNC_Y1_LOSSLESS:
        defect = entropy(p, {"Y1"}, {"S2"})
        if defect > HYPOTHESIS_TOL:
            raise HypothesisError(
                f"{case.value} needs Y1 to be a function of S2; "
                f"H(Y1 | S2) = {defect:.3e}"
            )
    elif case == CaseTag.COMP_DELIVERY:
        n1, n2, m1, m2 = source.sizes
        if m2 != n1 or m1 != n2:
            raise HypothesisError(
                f"{case.value} needs |Y2| = |S1| and |Y1| = |S2|; "
                f"got sizes {source.sizes}"
            )
        probs = p.probs
        idx = np.indices(probs.shape)
        mismatch = float(
            probs[(idx[0] != idx[3]) | (idx[1] != idx[2])].sum()
        )
        if mismatch > HYPOTHESIS_TOL:
            raise HypothesisError(
                f"{case.value} needs Y2 = S1 and Y1 = S2; "
                f"mismatch mass = {mismatch:.3e}"
            )
    else:  # pragma: no cover - exhaustive above
        raise ValueError(f"unhandled case {case}")


def _inner_u1_minimum(
    source: JointSource,
    d1: np.ndarray,
    D1: float,
    search,
    strategy: str,
) -> float:
    from . import optimize

    cfg = search if search is not None else optimize.SearchConfig(seed=0)
    result = optimize.minimize_u1_layer(source, d1, D1, cfg, strategy=strategy)
    return result.best.individual_layer


def closed_form(
    source: JointSource,
    case: CaseTag,
    d1: np.ndarray | None = None,
    D1: float | None = None,
    search=None,
    strategy: str = "heuristic",
) -> ClosedFormResult:
    """Value of a closed-form special case, after verifying its hypothesis.

    Lossy cases additionally minimize the individual layer over the ``U1``
    channel (grid or heuristic, per ``strategy``); lossless cases are pure
    entropy expressions.
    """
    check_case_hypothesis(source, case)
    p = source.pmf

    if case in _LOSSY_CASES:
        if d1 is None or D1 is None:
            raise ValueError(f"{case.value} needs d1 and D1")
        inner = _inner_u1_minimum(source, d1, D1, search, strategy)
        if case == CaseTag.DEGRADED:
            value = entropy(p, {"S2"}, {"Y2"}) + inner
        elif case == CaseTag.REVERSE_DEGRADED:
            value = entropy(p, {"S2"}, {"Y1"}) + inner
        else:  # FUNC_Y2_LOSSY
            value = (
                max(entropy(p, {"S2"}, {"Y1"}), entropy(p, {"S2"}, {"Y2"}))
                + inner
            )
    elif case == CaseTag.DEGRADED_LOSSLESS:
        value = entropy(p, {"S2"}, {"Y2"}) + entropy(p, {"S1"}, {"S2", "Y1"})
    elif case == CaseTag.REVERSE_DEGRADED_LOSSLESS:
        value = entropy(p, {"S1", "S2"}, {"Y1"})
    elif case == CaseTag.Y2_ABSENT:
        value = entropy(p, {"S2"}) + entropy(p, {"S1"}, {"Y1", "S2"})
    elif case == CaseTag.Y1_ABSENT:
        value = entropy(p, {"S1", "S2"})
    elif case == CaseTag.FUNC_Y2_LOSSLESS:
        value = max(
            entropy(p, {"S1", "S2"}, {"Y1"}),
            entropy(p, {"S2"}, {"Y2"}) + entropy(p, {"S1"}, {"Y1", "S2"}),
        )
    elif case == CaseTag.FUNC_Y1_LOSSLESS:
        value = max(
            entropy(p, {"S1", "S2"}, {"Y1"}),
            entropy(p, {"S1", "S2"}, {"Y2"}),
        )
    elif case == CaseTag.COMP_DELIVERY:
        value = max(entropy(p, {"S2"}, {"S1"}), entropy(p, {"S1"}, {"S2"}))
    else:  # pragma: no cover
        raise ValueError(f"unhandled case {case}")

    return ClosedFormResult(case, value, _U0_CHOICE.get(case))


def induced_u0_channel(source: JointSource, choice: str) -> AuxChannel:
    """The fixed common-layer channel a closed-form case points at."""
    n1, n2 = source.sizes[:2]
    if choice == "constant":
        return constant_channel(LOSSLESS, (n1, n2))
    if choice == "copy_s1":
        return deterministic_channel(
            LOSSLESS, (n1, n2), (n1,), lambda s1, s2: s1
        )
    raise ValueError(f"unknown induced channel choice {choice!r}")


# --------------------------------------------------------------------------
# single-decoder baselines
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BaselineResult:
    rate: float
    distortion: float
    feasible: bool


def _pair_joint(source_sy: Pmf, channel: CondPmf, out_name: str) -> Pmf:
    if source_sy.names != ("S", "Y"):
        raise ValueError(f"pair source axes must be ('S', 'Y'), got {source_sy.names}")
    if channel.given_names != ("S",) or channel.output_names != (out_name,):
        raise ValueError(
            f"channel must map S to {out_name}, got "
            f"{channel.given_names} -> {channel.output_names}"
        )
    if channel.given_shape != (source_sy.probs.shape[0],):
        raise ValueError("channel source alphabet does not match the pair source")
    # P(out, s, y) = P(s, y) * P(out | s)
    joint = source_sy.probs[None, :, :] * channel.probs.T[:, :, None]
    return Pmf((out_name, "S", "Y"), joint)


def single_decoder_wyner_ziv(
    source_sy: Pmf,
    channel: CondPmf,
    d: np.ndarray,
    D: float,
) -> BaselineResult:
    """Side information used for both binning and estimation: rate
    ``I(V; S | Y)`` with the reconstruction picked per ``(v, y)``."""
    joint = _pair_joint(source_sy, channel, "V")
    rate = mutual_information(joint, {"V"}, {"S"}, {"Y"})
    d = np.asarray(d, dtype=float)
    weights = np.moveaxis(joint.probs, 1, -1)  # (v, y, s)
    cost = weights @ d  # (v, y, s_hat)
    distortion = float(cost.min(axis=-1).sum())
    return BaselineResult(rate, distortion, distortion <= D + FEASIBILITY_SLACK)


def single_decoder_common_reconstruction(
    source_sy: Pmf,
    channel: CondPmf,
    d: np.ndarray,
    D: float,
) -> BaselineResult:
    """Side information used for binning only: the reconstruction is the
    channel output itself, so the distortion is a direct expectation."""
    joint = _pair_joint(source_sy, channel, "Shat")
    rate = mutual_information(joint, {"Shat"}, {"S"}, {"Y"})
    d = np.asarray(d, dtype=float)
    pair = joint.probs.sum(axis=2)  # (s_hat, s)
    distortion = float((pair.T * d).sum())
    return BaselineResult(rate, distortion, distortion <= D + FEASIBILITY_SLACK)
