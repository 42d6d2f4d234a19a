"""Finite-alphabet probability mass functions and exact information measures.

All tensors are dense ``numpy`` arrays indexed by named axes; alphabets are
integer ranges ``0..size-1``.  Entropies and mutual informations are computed
exactly (base-2 logarithm, ``0 log 0 = 0``), which keeps dyadic distributions
bit-exact in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

PMF_ATOL = 1e-12
_LN2 = np.log(2.0)


@dataclass(frozen=True)
class Alphabet:
    """A finite symbol set; symbols are the indices ``0..size-1``."""

    size: int

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.size}")


def _as_name_tuple(names: Iterable[str]) -> tuple[str, ...]:
    t = tuple(names)
    if len(set(t)) != len(t):
        raise ValueError(f"duplicate axis names in {t}")
    return t


@dataclass(frozen=True)
class Pmf:
    """A joint probability mass function over named finite axes.

    ``probs`` must be entrywise nonnegative and sum to one within
    ``PMF_ATOL``; its shape determines the axis alphabets.
    """

    names: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        names = _as_name_tuple(self.names)
        object.__setattr__(self, "names", names)
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != len(names):
            raise ValueError(
                f"tensor has {probs.ndim} axes but {len(names)} names given"
            )
        if probs.size == 0:
            raise ValueError("empty probability tensor")
        if np.any(probs < 0):
            raise ValueError("negative probability entry")
        total = float(probs.sum())
        if abs(total - 1.0) > PMF_ATOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def axes(self) -> tuple[tuple[str, Alphabet], ...]:
        return tuple(
            (n, Alphabet(s)) for n, s in zip(self.names, self.probs.shape)
        )

    def size(self, name: str) -> int:
        return self.probs.shape[self.index(name)]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown axis {name!r}; have {self.names}") from None


@dataclass(frozen=True)
class CondPmf:
    """A conditional pmf ``P(output | given)`` as a dense tensor.

    The tensor is laid out ``given axes x output axes``; every slice at a
    fixed assignment of the given axes sums to one within ``PMF_ATOL``.
    """

    given_names: tuple[str, ...]
    output_names: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        given = _as_name_tuple(self.given_names)
        output = _as_name_tuple(self.output_names)
        if set(given) & set(output):
            raise ValueError("given and output axes overlap")
        object.__setattr__(self, "given_names", given)
        object.__setattr__(self, "output_names", output)
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != len(given) + len(output):
            raise ValueError(
                f"tensor has {probs.ndim} axes, expected "
                f"{len(given)} given + {len(output)} output"
            )
        if np.any(probs < 0):
            raise ValueError("negative probability entry")
        out_axes = tuple(range(len(given), probs.ndim))
        sums = probs.sum(axis=out_axes)
        if np.any(np.abs(sums - 1.0) > PMF_ATOL):
            worst = float(np.abs(sums - 1.0).max())
            raise ValueError(
                f"conditional slices sum off by up to {worst:.3e} (> {PMF_ATOL})"
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def given_shape(self) -> tuple[int, ...]:
        return self.probs.shape[: len(self.given_names)]

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.probs.shape[len(self.given_names):]


def marginalize(p: Pmf, keep: Iterable[str]) -> Pmf:
    """Sum out every axis not in ``keep``; axis order follows ``p``."""
    keep_set = set(keep)
    unknown = keep_set - set(p.names)
    if unknown:
        raise ValueError(f"unknown axis labels {sorted(unknown)}; have {p.names}")
    drop = tuple(i for i, n in enumerate(p.names) if n not in keep_set)
    kept_names = tuple(n for n in p.names if n in keep_set)
    if not kept_names:
        raise ValueError("cannot marginalize away every axis")
    return Pmf(kept_names, p.probs.sum(axis=drop) if drop else p.probs)


def _plain_entropy(probs: np.ndarray) -> float:
    return float(-xlogy(probs, probs).sum() / _LN2)


def joint_entropy(p: Pmf, names: Iterable[str]) -> float:
    """Joint entropy in bits of the axes in ``names`` (duplicates ignored)."""
    return _plain_entropy(marginalize(p, set(names)).probs)


def entropy(p: Pmf, of: Iterable[str], given: Iterable[str] = ()) -> float:
    """Conditional entropy ``H(of | given)`` in bits.

    Computed as ``H(of, given) - H(given)``, which skips zero-mass
    conditioning slices automatically.
    """
    of_set, given_set = set(of), set(given)
    if of_set & given_set:
        raise ValueError(f"overlapping axis sets: {sorted(of_set & given_set)}")
    if not of_set:
        raise ValueError("empty 'of' set")
    h_joint = joint_entropy(p, of_set | given_set)
    if not given_set:
        return h_joint
    return h_joint - joint_entropy(p, given_set)


def mutual_information(
    p: Pmf,
    a: Iterable[str],
    b: Iterable[str],
    given: Iterable[str] = (),
) -> float:
    """Conditional mutual information ``I(a; b | given)`` in bits.

    The sets must be pairwise disjoint.  Tiny negative values from float
    rounding are clamped to zero.
    """
    a_set, b_set, g_set = set(a), set(b), set(given)
    for x, y in ((a_set, b_set), (a_set, g_set), (b_set, g_set)):
        if x & y:
            raise ValueError(f"overlapping axis sets: {sorted(x & y)}")
    if not a_set or not b_set:
        raise ValueError("empty axis set")
    value = entropy(p, a_set, g_set) - entropy(p, a_set, b_set | g_set)
    return max(value, 0.0)


def coupled_information(
    p: Pmf,
    a: Iterable[str],
    b: Iterable[str],
    given: Iterable[str] = (),
) -> float:
    """``I(a; b | given)`` where ``a`` and ``b`` may share axes.

    Shared axes are treated as common components of the two vectors, via
    ``H(a,g) + H(b,g) - H(a,b,g) - H(g)``.  ``given`` must be disjoint from
    both sides.
    """
    a_set, b_set, g_set = set(a), set(b), set(given)
    if (a_set | b_set) & g_set:
        raise ValueError("conditioning axes overlap the information sets")
    value = (
        joint_entropy(p, a_set | g_set)
        + joint_entropy(p, b_set | g_set)
        - joint_entropy(p, a_set | b_set | g_set)
        - (joint_entropy(p, g_set) if g_set else 0.0)
    )
    return max(value, 0.0)


def random_pmf(
    names: Sequence[str],
    sizes: Sequence[int],
    rng: np.random.Generator,
    alpha: float = 1.0,
) -> Pmf:
    """Draw a pmf from a flat Dirichlet over the full joint alphabet."""
    cells = int(np.prod(sizes))
    probs = rng.dirichlet(np.full(cells, alpha)).reshape(tuple(sizes))
    return Pmf(tuple(names), probs)


def random_cond_pmf(
    given_names: Sequence[str],
    given_sizes: Sequence[int],
    output_names: Sequence[str],
    output_sizes: Sequence[int],
    rng: np.random.Generator,
    alpha: float = 1.0,
) -> CondPmf:
    """Draw a conditional pmf with i.i.d. Dirichlet columns."""
    g_cells = int(np.prod(given_sizes))
    o_cells = int(np.prod(output_sizes))
    cols = rng.dirichlet(np.full(o_cells, alpha), size=g_cells)
    probs = cols.reshape(tuple(given_sizes) + tuple(output_sizes))
    return CondPmf(tuple(given_names), tuple(output_names), probs)
