"""Minimization of the rate objectives over auxiliary channels.

Two strategies: an exhaustive oracle over a quantized simplex grid (exact on
its grid, budget-guarded) and a seeded random-restart local search with
annealed softmax smoothing of the max term.  Both report the best channel
found, its exact rate breakdown, and the number of objective evaluations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.special import xlogy

from .model import (
    COMMON_RECONSTRUCTION,
    LOSSLESS,
    ONE_DISTORTION,
    AuxChannel,
    JointSource,
    channel_from_table,
)
from .rates import FEASIBILITY_SLACK, RateBreakdown

U1_LAYER = "u1_layer"

_LN2 = np.log(2.0)
DEFAULT_BUDGET = 10**8


class BudgetError(RuntimeError):
    """The requested exhaustive grid exceeds the evaluation budget."""

    def __init__(self, size: int, budget: int):
        super().__init__(
            f"grid would need {size} channel evaluations (budget {budget})"
        )
        self.size = size
        self.budget = budget


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for both optimization strategies.

    Cardinalities left as ``None`` fall back to support-style caps derived
    from the source alphabet sizes; the grid step must be ``1/k``.
    """

    u0_card: int | None = None
    u1_card: int | None = None
    s2hat_card: int | None = None
    grid_step: Fraction = Fraction(1, 1)
    restarts: int = 16
    max_iters: int = 60
    seed: int = 0
    tolerance: float = 1e-6
    budget: int = DEFAULT_BUDGET

    def __post_init__(self) -> None:
        step = Fraction(self.grid_step)
        if step.numerator != 1 or not (0 < step <= 1):
            raise ValueError(f"grid_step must be 1/k for k >= 1, got {step}")
        object.__setattr__(self, "grid_step", step)
        for name in ("u0_card", "u1_card", "s2hat_card"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be >= 1")


def resolved_cards(
    cfg: SearchConfig, source: JointSource, kind: str
) -> tuple[int, ...]:
    """Auxiliary alphabet sizes actually searched for ``kind``."""
    n1, n2 = source.sizes[:2]
    u0 = cfg.u0_card if cfg.u0_card is not None else n1 * n2 + 2
    u1 = cfg.u1_card if cfg.u1_card is not None else n1 * n2 + 1
    s2h = cfg.s2hat_card if cfg.s2hat_card is not None else n2
    if kind == ONE_DISTORTION:
        return (u0, u1)
    if kind == LOSSLESS:
        return (u0,)
    if kind == COMMON_RECONSTRUCTION:
        return (u0, u1, s2h)
    if kind == U1_LAYER:
        return (u1,)
    raise ValueError(f"unknown optimization kind {kind!r}")


@dataclass(frozen=True)
class OptimizeResult:
    best: RateBreakdown
    channel: AuxChannel
    strategy: str
    evaluations: int


def _entropy_bits(arr: np.ndarray) -> float:
    return float(-xlogy(arr, arr).sum() / _LN2)


class _Problem:
    """Exact and smoothed objective evaluation for one optimization kind.

    Channels are handled as flat arrays of shape ``(n1 * n2, out_dim)``;
    source-only entropy terms are precomputed once.
    """

    def __init__(self, source, kind, cards, d1, D1, d2, D2):
        self.source = source
        self.kind = kind
        self.cards = tuple(cards)
        self.d1 = None if d1 is None else np.asarray(d1, dtype=float)
        self.D1 = D1
        self.d2 = None if d2 is None else np.asarray(d2, dtype=float)
        self.D2 = D2
        self.evaluations = 0

        src = source.pmf.probs
        self.n1, self.n2, self.m1c, self.m2c = src.shape
        self.cells = self.n1 * self.n2
        self.out_dim = int(np.prod(self.cards))
        self.sy1 = src.sum(axis=3)  # (s1, s2, y1)
        self.sy2 = src.sum(axis=2)  # (s1, s2, y2)
        self.ps = src.sum(axis=(2, 3))  # (s1, s2)
        self.h_y1 = _entropy_bits(self.sy1.sum(axis=(0, 1)))
        self.h_y2 = _entropy_bits(self.sy2.sum(axis=(0, 1)))
        self.h_s1s2y1 = _entropy_bits(self.sy1)
        self.h_s1s2y2 = _entropy_bits(self.sy2)
        if kind in (ONE_DISTORTION, COMMON_RECONSTRUCTION, U1_LAYER):
            if self.d1 is None or D1 is None:
                raise ValueError(f"{kind} optimization needs d1 and D1")
        if kind == COMMON_RECONSTRUCTION and (self.d2 is None or D2 is None):
            raise ValueError("common-reconstruction optimization needs d2 and D2")

    # -- channel plumbing ---------------------------------------------------

    def _tensor(self, flat: np.ndarray) -> np.ndarray:
        return flat.reshape((self.n1, self.n2) + self.cards)

    def to_channel(self, flat: np.ndarray) -> AuxChannel:
        tensor = self._tensor(flat)
        if self.kind == U1_LAYER:
            tensor = tensor[:, :, None, :]  # constant U0 in front
            return channel_from_table(ONE_DISTORTION, tensor)
        kind = LOSSLESS if self.kind == LOSSLESS else self.kind
        return channel_from_table(kind, tensor)

    # -- exact evaluation ---------------------------------------------------

    def exact(self, flat: np.ndarray):
        """Return ``(value, t1, t2, layer, dist1, dist2)`` for one channel."""
        self.evaluations += 1
        if self.kind == LOSSLESS:
            return self._exact_lossless(flat)
        if self.kind == COMMON_RECONSTRUCTION:
            return self._exact_common(flat)
        return self._exact_one_distortion(flat)

    def _exact_lossless(self, flat):
        ch = self._tensor(flat)  # (s1, s2, u0)
        a1 = np.einsum("aby,abu->uaby", self.sy1, ch)
        a2 = np.einsum("aby,abu->uaby", self.sy2, ch)
        h_s1_g1 = _entropy_bits(a1) - _entropy_bits(a1.sum(axis=1))
        h_s1_g2 = _entropy_bits(a2) - _entropy_bits(a2.sum(axis=1))
        t1 = self.h_s1s2y1 - self.h_y1
        t2 = self.h_s1s2y2 - self.h_y2 + h_s1_g1 - h_s1_g2
        return max(t1, t2), t1, t2, 0.0, 0.0, None

    def _exact_one_distortion(self, flat):
        if self.kind == U1_LAYER:
            ch = self._tensor(flat)[:, :, None, :]
        else:
            ch = self._tensor(flat)  # (s1, s2, u0, u1)
        cu0 = ch.sum(axis=3)
        a1 = np.einsum("aby,abu->uaby", self.sy1, cu0)  # (u0, s1, s2, y1)
        a2 = np.einsum("aby,abu->uaby", self.sy2, cu0)
        h_a1 = _entropy_bits(a1)
        h_u0s2y1 = _entropy_bits(a1.sum(axis=1))
        t1 = h_u0s2y1 + self.h_s1s2y1 - h_a1 - self.h_y1
        t2 = (
            _entropy_bits(a2.sum(axis=1))
            + self.h_s1s2y2
            - _entropy_bits(a2)
            - self.h_y2
        )
        b = np.einsum("aby,abuv->uvaby", self.sy1, ch)  # (u0, u1, s1, s2, y1)
        layer = (
            _entropy_bits(b.sum(axis=2)) + h_a1 - _entropy_bits(b) - h_u0s2y1
        )
        layer = max(layer, 0.0)
        # decoder 1 reconstructs from (u0, u1, s2, y1)
        weights = np.transpose(b, (0, 1, 3, 4, 2))
        dist1 = float((weights @ self.d1).min(axis=-1).sum())
        if self.kind == U1_LAYER:
            return layer, 0.0, 0.0, layer, dist1, None
        return max(t1, t2) + layer, max(t1, 0.0), max(t2, 0.0), layer, dist1, None

    def _exact_common(self, flat):
        ch = self._tensor(flat)  # (s1, s2, u0, u1, s2h)
        common = ch.sum(axis=3)  # (s1, s2, u0, s2h)
        a1 = np.einsum("aby,abuw->uwaby", self.sy1, common)
        a2 = np.einsum("aby,abuw->uwaby", self.sy2, common)
        h_a1 = _entropy_bits(a1)
        h_c_y1 = _entropy_bits(a1.sum(axis=(2, 3)))  # keeps (u0, s2h, y1)
        t1 = h_c_y1 + self.h_s1s2y1 - h_a1 - self.h_y1
        t2 = (
            _entropy_bits(a2.sum(axis=(2, 3)))
            + self.h_s1s2y2
            - _entropy_bits(a2)
            - self.h_y2
        )
        b = np.einsum("aby,abuvw->uvwaby", self.sy1, ch)
        # layer = I(U1; S1, S2 | Y1, S2hat, U0)
        layer = (
            _entropy_bits(b.sum(axis=(3, 4)))  # (u0, u1, s2h, y1)
            + h_a1
            - _entropy_bits(b)
            - h_c_y1
        )
        layer = max(layer, 0.0)
        # decoder 1 reconstructs from (u0, u1, s2hat, y1); sum out s2
        weights = np.transpose(b.sum(axis=4), (0, 1, 2, 4, 3))
        dist1 = float((weights @ self.d1).min(axis=-1).sum())
        pair = np.einsum("ab,abuvw->bw", self.ps, ch)  # (s2, s2hat)
        dist2 = float((pair * self.d2).sum())
        return max(t1, t2) + layer, max(t1, 0.0), max(t2, 0.0), layer, dist1, dist2

    # -- derived quantities ---------------------------------------------------

    def violation(self, dist1, dist2) -> float:
        v = 0.0
        if self.D1 is not None and dist1 is not None:
            v += max(0.0, dist1 - self.D1)
        if self.D2 is not None and dist2 is not None:
            v += max(0.0, dist2 - self.D2)
        return v

    def feasible(self, dist1, dist2) -> bool:
        ok = True
        if self.D1 is not None and dist1 is not None:
            ok &= dist1 <= self.D1 + FEASIBILITY_SLACK
        if self.D2 is not None and dist2 is not None:
            ok &= dist2 <= self.D2 + FEASIBILITY_SLACK
        return bool(ok)

    def smooth(self, flat, temp, lam):
        """Softmax-smoothed objective plus quadratic distortion penalty."""
        value, t1, t2, layer, dist1, dist2 = self.exact(flat)
        lo, hi = (t1, t2) if t1 <= t2 else (t2, t1)
        smax = hi + temp * np.log2(1.0 + 2.0 ** ((lo - hi) / temp))
        penalty = 0.0
        if self.D1 is not None and dist1 is not None:
            penalty += lam * max(0.0, dist1 - self.D1) ** 2
        if self.D2 is not None and dist2 is not None:
            penalty += lam * max(0.0, dist2 - self.D2) ** 2
        return smax + layer + penalty

    def breakdown(self, flat) -> RateBreakdown:
        value, t1, t2, layer, dist1, dist2 = self.exact(flat)
        return RateBreakdown(
            rate=value,
            term_decoder1=t1,
            term_decoder2=t2,
            individual_layer=layer,
            distortion1=dist1 if dist1 is not None else 0.0,
            distortion2=dist2,
            feasible=self.feasible(dist1, dist2),
        )


def _make_problem(source, cfg, kind, d1, D1, d2, D2) -> _Problem:
    cards = resolved_cards(cfg, source, kind)
    return _Problem(source, kind, cards, d1, D1, d2, D2)


def simplex_grid(dim: int, k: int) -> np.ndarray:
    """All points of the ``1/k``-quantized probability simplex in ``dim``
    coordinates, lexicographically ordered."""
    points = []
    for combo in itertools.combinations(range(k + dim - 1), dim - 1):
        prev = -1
        parts = []
        for c in combo:
            parts.append(c - prev - 1)
            prev = c
        parts.append(k + dim - 2 - prev)
        points.append(parts)
    return np.array(sorted(points), dtype=float) / k


def _candidate_key(flat: np.ndarray, value: float, viol: float, feasible: bool):
    return (0 if feasible else 1, viol, value, tuple(flat.ravel()))


def grid_oracle(
    source: JointSource,
    cfg: SearchConfig,
    kind: str = ONE_DISTORTION,
    d1: np.ndarray | None = None,
    D1: float | None = None,
    d2: np.ndarray | None = None,
    D2: float | None = None,
) -> OptimizeResult:
    """Exact minimum over all channels whose conditional columns lie on the
    quantized simplex grid (vertices included for every step)."""
    problem = _make_problem(source, cfg, kind, d1, D1, d2, D2)
    k = cfg.grid_step.denominator
    columns = simplex_grid(problem.out_dim, k)
    total = len(columns) ** problem.cells
    if total > cfg.budget:
        raise BudgetError(total, cfg.budget)

    best_key = None
    best_flat = None
    for combo in itertools.product(range(len(columns)), repeat=problem.cells):
        flat = columns[list(combo)]
        value, t1, t2, layer, dist1, dist2 = problem.exact(flat)
        key = _candidate_key(
            flat, value, problem.violation(dist1, dist2),
            problem.feasible(dist1, dist2),
        )
        if best_key is None or key < best_key:
            best_key = key
            best_flat = flat
    return OptimizeResult(
        best=problem.breakdown(best_flat),
        channel=problem.to_channel(best_flat),
        strategy="grid_oracle",
        evaluations=problem.evaluations,
    )


_TEMPS = (1.0, 0.3, 0.1, 0.03, 0.01, 1e-3)
_LINE_STEPS = (1.0, 0.5, 0.25)
_PENALTY_ROUNDS = 6


def _local_search(problem, flat, cfg, temps=_TEMPS):
    """Coordinate-wise simplex line search against the smoothed objective."""
    flat = flat.copy()
    dim = problem.out_dim
    targets = np.vstack([np.eye(dim), np.full((1, dim), 1.0 / dim)])
    lam = 1.0
    sweeps = 0
    for _ in range(_PENALTY_ROUNDS):
        for temp in temps:
            while sweeps < cfg.max_iters:
                sweeps += 1
                improved = False
                base = problem.smooth(flat, temp, lam)
                for cell in range(problem.cells):
                    col = flat[cell].copy()
                    best_score, best_col = base, None
                    for target in targets:
                        for t in _LINE_STEPS:
                            cand = (1.0 - t) * col + t * target
                            flat[cell] = cand
                            score = problem.smooth(flat, temp, lam)
                            if score < best_score - 1e-12:
                                best_score, best_col = score, cand.copy()
                    if best_col is not None:
                        flat[cell] = best_col
                        base = best_score
                        improved = True
                    else:
                        flat[cell] = col
                if not improved:
                    break
        _, _, _, _, dist1, dist2 = problem.exact(flat)
        if problem.feasible(dist1, dist2):
            break
        lam *= 10.0
    return flat


def heuristic_search(
    source: JointSource,
    cfg: SearchConfig,
    kind: str = ONE_DISTORTION,
    d1: np.ndarray | None = None,
    D1: float | None = None,
    d2: np.ndarray | None = None,
    D2: float | None = None,
    warm_start: np.ndarray | None = None,
) -> OptimizeResult:
    """Random-restart local search; deterministic in ``cfg.seed``.

    Restart endpoints are reduced by ``(feasibility, violation, exact value,
    lexicographic channel)``, so the outcome does not depend on evaluation
    order.  ``warm_start`` replaces the first restart's initial point.
    """
    problem = _make_problem(source, cfg, kind, d1, D1, d2, D2)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    alphas = (0.15, 1.0, 4.0)
    best_key = None
    best_flat = None
    for r, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        if r == 0 and warm_start is not None:
            flat = np.asarray(warm_start, dtype=float).reshape(
                problem.cells, problem.out_dim
            ).copy()
        else:
            flat = rng.dirichlet(
                np.full(problem.out_dim, alphas[r % len(alphas)]),
                size=problem.cells,
            )
        flat = _local_search(problem, flat, cfg)
        value, t1, t2, layer, dist1, dist2 = problem.exact(flat)
        key = _candidate_key(
            flat, value, problem.violation(dist1, dist2),
            problem.feasible(dist1, dist2),
        )
        if best_key is None or key < best_key:
            best_key = key
            best_flat = flat
    return OptimizeResult(
        best=problem.breakdown(best_flat),
        channel=problem.to_channel(best_flat),
        strategy="heuristic",
        evaluations=problem.evaluations,
    )


def minimize_u1_layer(
    source: JointSource,
    d1: np.ndarray,
    D1: float,
    cfg: SearchConfig,
    strategy: str = "heuristic",
) -> OptimizeResult:
    """Minimize the individual layer alone over ``P(U1 | S1, S2)`` subject to
    the decoder-1 distortion constraint (used by the lossy closed forms)."""
    if strategy == "oracle":
        return grid_oracle(source, cfg, U1_LAYER, d1=d1, D1=D1)
    return heuristic_search(source, cfg, U1_LAYER, d1=d1, D1=D1)


def sweep_distortion(
    source: JointSource,
    cfg: SearchConfig,
    D1_list: list[float],
    kind: str = ONE_DISTORTION,
    d1: np.ndarray | None = None,
    d2: np.ndarray | None = None,
    D2_list: list[float] | None = None,
    strategy: str = "heuristic",
) -> list[tuple[float, OptimizeResult]]:
    """Per-point optimization over a nondecreasing distortion schedule.

    Each point warm-starts from the previous optimum, and the reported curve
    is the running minimum, which is the monotone hull the true curve must
    satisfy.
    """
    if not D1_list:
        raise ValueError("empty distortion list")
    if sorted(D1_list) != list(D1_list):
        raise ValueError("distortion list must be sorted ascending")
    if D2_list is not None:
        if len(D2_list) != len(D1_list):
            raise ValueError("D2 list must match D1 list length")
        if sorted(D2_list) != list(D2_list):
            raise ValueError("D2 list must be sorted ascending")

    results: list[tuple[float, OptimizeResult]] = []
    warm = None
    for i, D1 in enumerate(D1_list):
        D2 = D2_list[i] if D2_list is not None else None
        if strategy == "oracle":
            res = grid_oracle(source, cfg, kind, d1=d1, D1=D1, d2=d2, D2=D2)
        else:
            res = heuristic_search(
                source, cfg, kind, d1=d1, D1=D1, d2=d2, D2=D2, warm_start=warm
            )
        prev = results[-1][1] if results else None
        if (
            prev is not None
            and prev.best.feasible
            and (not res.best.feasible or prev.best.rate < res.best.rate)
        ):
            res = replace(prev, strategy=res.strategy)
        results.append((D1, res))
        ch = res.channel.cond.probs
        if res.channel.kind == ONE_DISTORTION and kind == U1_LAYER:
            # the u1-layer kind carries a synthetic constant-U0 axis
            ch = ch[:, :, 0, :]
        warm = ch.reshape(ch.shape[0] * ch.shape[1], -1)
    return results
