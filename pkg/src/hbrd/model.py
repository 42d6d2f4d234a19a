"""Problem data model: the four-component source, distortion measures,
auxiliary channels, and their composition into a full joint law.

The full joint always factors as ``P(aux | s1, s2) * P(s1, s2, y1, y2)``, so
the auxiliary block is conditionally independent of the side information
given the sources by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .probability import CondPmf, Pmf, PMF_ATOL

SOURCE_AXES = ("S1", "S2", "Y1", "Y2")

ONE_DISTORTION = "one_distortion"
COMMON_RECONSTRUCTION = "common_reconstruction"
LOSSLESS = "lossless"

# auxiliary output axes per problem kind
_OUTPUT_AXES = {
    ONE_DISTORTION: ("U0", "U1"),
    COMMON_RECONSTRUCTION: ("U0", "U1", "S2hat"),
    LOSSLESS: ("U0",),
}


@dataclass(frozen=True)
class JointSource:
    """Joint law of the two source components and the two side informations."""

    pmf: Pmf

    def __post_init__(self) -> None:
        if self.pmf.names != SOURCE_AXES:
            raise ValueError(
                f"source axes must be {SOURCE_AXES}, got {self.pmf.names}"
            )

    @property
    def sizes(self) -> tuple[int, int, int, int]:
        return self.pmf.probs.shape


def hamming(size: int, rec_size: int | None = None) -> np.ndarray:
    """Hamming distortion table: 0 on the diagonal, 1 elsewhere."""
    rec = size if rec_size is None else rec_size
    return 1.0 - np.eye(size, rec)


@dataclass(frozen=True)
class DistortionSpec:
    """Per-letter distortion tables; ``d2`` only exists for the
    common-reconstruction problem."""

    d1: np.ndarray
    d2: np.ndarray | None = None

    def __post_init__(self) -> None:
        for label, table in (("d1", self.d1), ("d2", self.d2)):
            if table is None:
                continue
            arr = np.asarray(table, dtype=float)
            if arr.ndim != 2:
                raise ValueError(f"{label} must be a 2-d table")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{label} entries must be finite and >= 0")
            arr.setflags(write=False)
            object.__setattr__(self, label, arr)


@dataclass(frozen=True)
class AuxChannel:
    """Conditional law of the auxiliary block given the source pair.

    ``kind`` selects the output axes: ``(U0, U1)`` for the one-distortion
    problem, ``(U0, U1, S2hat)`` when a shared reconstruction of the second
    component is part of the description, and ``(U0,)`` for the purely
    lossless evaluation.
    """

    kind: str
    cond: CondPmf

    def __post_init__(self) -> None:
        if self.kind not in _OUTPUT_AXES:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        expected = _OUTPUT_AXES[self.kind]
        if self.cond.given_names != ("S1", "S2"):
            raise ValueError(
                f"channel must condition on ('S1', 'S2'), got {self.cond.given_names}"
            )
        if self.cond.output_names != expected:
            raise ValueError(
                f"{self.kind} channel outputs must be {expected}, "
                f"got {self.cond.output_names}"
            )

    @property
    def output_names(self) -> tuple[str, ...]:
        return self.cond.output_names


def channel_from_table(kind: str, probs: np.ndarray) -> AuxChannel:
    """Build an :class:`AuxChannel` from a ``(S1, S2, *outputs)`` tensor."""
    return AuxChannel(kind, CondPmf(("S1", "S2"), _OUTPUT_AXES[kind], probs))


def deterministic_channel(
    kind: str,
    source_sizes: tuple[int, int],
    output_sizes: Sequence[int],
    fn: Callable[[int, int], tuple[int, ...] | int],
) -> AuxChannel:
    """Point-mass channel with outputs ``fn(s1, s2)``."""
    n1, n2 = source_sizes
    probs = np.zeros((n1, n2) + tuple(output_sizes))
    for s1 in range(n1):
        for s2 in range(n2):
            out = fn(s1, s2)
            if isinstance(out, int):
                out = (out,)
            probs[(s1, s2) + tuple(out)] = 1.0
    return channel_from_table(kind, probs)


def constant_channel(kind: str, source_sizes: tuple[int, int]) -> AuxChannel:
    """Channel whose auxiliary outputs are all constants (single symbol)."""
    n_out = len(_OUTPUT_AXES[kind])
    return deterministic_channel(
        kind, source_sizes, (1,) * n_out, lambda s1, s2: (0,) * n_out
    )


@dataclass(frozen=True)
class FullJoint:
    """Joint law of auxiliaries, sources and side information."""

    kind: str
    pmf: Pmf

    @property
    def tuple_axes(self) -> tuple[str, ...]:
        """Axes available to decoder 1's reconstruction map."""
        if self.kind == COMMON_RECONSTRUCTION:
            return ("U0", "U1", "S2hat", "Y1")
        if self.kind == LOSSLESS:
            return ("U0", "S2", "Y1")
        return ("U0", "U1", "S2", "Y1")


def compose(source: JointSource, channel: AuxChannel) -> FullJoint:
    """Product construction ``P(aux | s1, s2) * P(s1, s2, y1, y2)``."""
    if channel.cond.given_shape != source.sizes[:2]:
        raise ValueError(
            f"channel conditions on alphabet sizes {channel.cond.given_shape}, "
            f"source has {source.sizes[:2]}"
        )
    src = source.pmf.probs  # (s1, s2, y1, y2)
    ch = channel.cond.probs  # (s1, s2, *outputs)
    n_out = len(channel.output_names)
    # move outputs in front of (s1, s2, y1, y2)
    full = src[(None,) * n_out] * np.moveaxis(
        ch[..., None, None], (0, 1), (n_out, n_out + 1)
    )
    names = channel.output_names + SOURCE_AXES
    return FullJoint(channel.kind, Pmf(names, full))


def _phi_weights(joint: FullJoint) -> np.ndarray:
    """Mass tensor over decoder 1's tuple axes plus ``S1`` (last axis)."""
    p = joint.pmf
    axes = joint.tuple_axes + ("S1",)
    keep = set(axes)
    drop = tuple(i for i, n in enumerate(p.names) if n not in keep)
    reduced = p.probs.sum(axis=drop) if drop else p.probs
    kept_order = tuple(n for n in p.names if n in keep)
    perm = tuple(kept_order.index(n) for n in axes)
    return np.transpose(reduced, perm)


@dataclass(frozen=True)
class ReconstructionMap:
    """Deterministic reconstruction of ``S1`` from decoder 1's tuple."""

    axes: tuple[str, ...]
    table: np.ndarray  # integer symbols of the reconstruction alphabet

    def __call__(self, *idx: int) -> int:
        return int(self.table[idx])


def optimal_phi(
    joint: FullJoint, d1: np.ndarray
) -> tuple[ReconstructionMap, float]:
    """Best deterministic reconstruction map and its expected distortion.

    For each tuple with positive mass the map picks the reconstruction
    symbol minimizing the posterior expected distortion (ties broken toward
    the smallest symbol), which attains the minimum over all deterministic
    maps; zero-mass tuples map to symbol 0.
    """
    d1 = np.asarray(d1, dtype=float)
    weights = _phi_weights(joint)  # (*tuple_axes, s1)
    if weights.shape[-1] != d1.shape[0]:
        raise ValueError(
            f"d1 covers {d1.shape[0]} source symbols, joint has {weights.shape[-1]}"
        )
    if not weights.sum() > 0:
        raise ValueError("joint law carries no mass")
    cost = weights @ d1  # (*tuple_axes, s1hat)
    table = np.argmin(cost, axis=-1)
    distortion = float(np.min(cost, axis=-1).sum())
    return ReconstructionMap(joint.tuple_axes, table), distortion


def expected_distortion(
    joint: FullJoint, phi: ReconstructionMap, d1: np.ndarray
) -> float:
    """Expected distortion of an explicitly supplied reconstruction map."""
    d1 = np.asarray(d1, dtype=float)
    weights = _phi_weights(joint)
    cost = weights @ d1
    return float(np.take_along_axis(cost, phi.table[..., None], axis=-1).sum())


def expected_d2(joint: FullJoint, d2: np.ndarray) -> float:
    """Expected distortion between ``S2`` and the shared reconstruction axis.

    Only defined for common-reconstruction joints: the reconstruction is an
    axis of the channel, not a function of any side information.
    """
    if joint.kind != COMMON_RECONSTRUCTION:
        raise ValueError("expected_d2 requires a common-reconstruction joint")
    d2 = np.asarray(d2, dtype=float)
    p = joint.pmf
    keep = {"S2", "S2hat"}
    drop = tuple(i for i, n in enumerate(p.names) if n not in keep)
    pair = p.probs.sum(axis=drop)
    # axis order follows the joint: S2hat before S2
    if d2.shape != (pair.shape[1], pair.shape[0]):
        raise ValueError(
            f"d2 shape {d2.shape} does not match (|S2|, |S2hat|) = "
            f"{(pair.shape[1], pair.shape[0])}"
        )
    return float((pair.T * d2).sum())


def markov_defect(joint: FullJoint) -> float:
    """``I(aux block; side informations | sources)`` — zero by construction."""
    from .probability import coupled_information

    aux = set(joint.pmf.names) - set(SOURCE_AXES)
    return coupled_information(joint.pmf, aux, {"Y1", "Y2"}, {"S1", "S2"})


def source_marginal_defect(joint: FullJoint, source: JointSource) -> float:
    """Largest entrywise gap between the composed marginal and the source."""
    p = joint.pmf
    drop = tuple(i for i, n in enumerate(p.names) if n not in set(SOURCE_AXES))
    marginal = p.probs.sum(axis=drop)
    return float(np.abs(marginal - source.pmf.probs).max())
