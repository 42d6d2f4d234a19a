"""Finite-blocklength Monte-Carlo simulation of the layered binning scheme.

Codebook generation, binning, typicality encoding and decoding, and
empirical error statistics.  All randomness is counter-based: codeword
symbols come from a keyed integer hash, and bin assignments come from keyed
index permutations, so books and bins are materialized lazily (only the
sequences a trial actually touches are ever drawn) while remaining exactly
reproducible from the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    ONE_DISTORTION,
    AuxChannel,
    JointSource,
    ReconstructionMap,
    compose,
    hamming,
    optimal_phi,
)
from .rate_region import SchemeRates

RELATIVE = "relative"
ABSOLUTE = "absolute"

MAX_BLOCKLENGTH = 20
DEFAULT_MAX_CODEBOOK = 1 << 26
DEFAULT_MAX_CANDIDATES = 1 << 21


class BudgetError(RuntimeError):
    """Requested simulation sizes exceed the configured budget."""


# --------------------------------------------------------------------------
# counter-based randomness
# --------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_C0 = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """64-bit finalizer hash (scalar)."""
    z = (x + _C0) & _MASK64
    z = ((z ^ (z >> 30)) * _C1) & _MASK64
    z = ((z ^ (z >> 27)) * _C2) & _MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(_C0))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
    return z ^ (z >> np.uint64(31))


def derive_key(*parts: int) -> int:
    """Fold integers (of any size) into one 64-bit key."""
    key = 0x243F6A8885A308D3
    for part in parts:
        part = int(part)
        while True:
            key = mix64(key ^ (part & _MASK64))
            part >>= 64
            if part == 0:
                break
    return key


def counter_uniforms(key: int, counters: np.ndarray) -> np.ndarray:
    """Reproducible uniforms in ``[0, 1)`` indexed by integer counters."""
    bits = mix64_array(counters.astype(np.uint64) ^ np.uint64(key))
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


class IndexPermutation:
    """Seeded bijection on ``[0, size)`` (balanced Feistel + cycle walking).

    Both directions are cheap, so "which items share this bin" is answered
    by enumerating preimages instead of scanning the whole domain.
    """

    _ROUNDS = 4

    def __init__(self, size: int, key: int):
        if size < 1:
            raise ValueError("size must be >= 1")
        self.size = size
        bits = max((size - 1).bit_length(), 2)
        self.half = (bits + 1) // 2
        self.mask = (1 << self.half) - 1
        self.domain = 1 << (2 * self.half)
        self.keys = [mix64(derive_key(key, r)) for r in range(self._ROUNDS)]
        self._vector_ok = self.domain <= (1 << 62)

    # scalar paths -----------------------------------------------------------

    def _block_forward(self, x: int) -> int:
        left, right = x >> self.half, x & self.mask
        for k in self.keys:
            left, right = right, left ^ (mix64(right ^ k) & self.mask)
        return (left << self.half) | right

    def _block_inverse(self, y: int) -> int:
        left, right = y >> self.half, y & self.mask
        for k in reversed(self.keys):
            left, right = right ^ (mix64(left ^ k) & self.mask), left
        return (left << self.half) | right

    def forward(self, x: int) -> int:
        if not 0 <= x < self.size:
            raise ValueError(f"index {x} outside [0, {self.size})")
        y = self._block_forward(x)
        while y >= self.size:
            y = self._block_forward(y)
        return y

    def inverse(self, y: int) -> int:
        if not 0 <= y < self.size:
            raise ValueError(f"index {y} outside [0, {self.size})")
        x = self._block_inverse(y)
        while x >= self.size:
            x = self._block_inverse(x)
        return x

    # vector paths ------------------------------------------------------------

    def _vector_walk(self, xs: np.ndarray, block) -> np.ndarray:
        out = block(xs.astype(np.uint64))
        pending = out >= self.size
        while pending.any():
            out[pending] = block(out[pending])
            pending = out >= self.size
        return out

    def _block_forward_vec(self, x: np.ndarray) -> np.ndarray:
        half, mask = np.uint64(self.half), np.uint64(self.mask)
        left, right = x >> half, x & mask
        for k in self.keys:
            left, right = right, left ^ (mix64_array(right ^ np.uint64(k)) & mask)
        return (left << half) | right

    def _block_inverse_vec(self, y: np.ndarray) -> np.ndarray:
        half, mask = np.uint64(self.half), np.uint64(self.mask)
        left, right = y >> half, y & mask
        for k in reversed(self.keys):
            left, right = right ^ (mix64_array(left ^ np.uint64(k)) & mask), left
        return (left << half) | right

    def inverse_array(self, ys: np.ndarray) -> np.ndarray:
        if not self._vector_ok:
            return np.array([self.inverse(int(y)) for y in ys], dtype=object)
        return self._vector_walk(np.asarray(ys), self._block_inverse_vec)


# --------------------------------------------------------------------------
# typicality
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TypicalityTest:
    """Frequency typicality against a flat joint law.

    ``relative`` slack is ``eps * p(cell)`` per cell; ``absolute`` slack is
    ``eps`` on positive cells.  Cells with zero probability must not occur
    in either flavor.  ``relax`` widens the slack (used when testing a
    marginal law that joint-typical sequences only satisfy approximately).
    """

    law: np.ndarray
    n: int
    eps: float
    flavor: str = RELATIVE
    relax: float = 1.0
    lo: np.ndarray = field(init=False, repr=False)
    hi: np.ndarray = field(init=False, repr=False)
    positive: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        shaped = np.asarray(self.law, dtype=float)
        p = shaped.ravel()
        if self.flavor == RELATIVE:
            slack = self.eps * self.relax * p
        elif self.flavor == ABSOLUTE:
            slack = np.where(p > 0, self.eps * self.relax, 0.0)
        else:
            raise ValueError(f"unknown typicality flavor {self.flavor!r}")
        lo = np.ceil(self.n * (p - slack) - 1e-9).clip(min=0).astype(np.int64)
        hi = np.floor(self.n * (p + slack) + 1e-9).astype(np.int64)
        hi[p == 0] = 0
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "positive", (p > 0).reshape(shaped.shape))

    @property
    def cells(self) -> int:
        return self.lo.size

    def check_counts(self, counts: np.ndarray) -> np.ndarray:
        """Boolean mask over rows of a ``(m, cells)`` count matrix."""
        counts = np.atleast_2d(counts)
        return np.all((counts >= self.lo) & (counts <= self.hi), axis=1)

    def check_sequence_cells(self, cell_index: np.ndarray) -> bool:
        counts = np.bincount(cell_index, minlength=self.cells)
        return bool(self.check_counts(counts[None, :])[0])


def type_counts(cell_index: np.ndarray, cells: int) -> np.ndarray:
    """Per-row cell counts of a ``(m, n)`` combined-index matrix."""
    cell_index = np.atleast_2d(cell_index)
    m, n = cell_index.shape
    offset = (np.arange(m, dtype=np.int64) * cells)[:, None]
    flat = (cell_index.astype(np.int64) + offset).ravel()
    return np.bincount(flat, minlength=m * cells).reshape(m, cells)


# --------------------------------------------------------------------------
# sequence indexing
# --------------------------------------------------------------------------


def seq_to_index(seq: np.ndarray, base: int) -> int:
    idx = 0
    for sym in seq:
        idx = idx * base + int(sym)
    return idx


def index_to_seq(idx: int, base: int, n: int) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        out[pos] = idx % base
        idx //= base
    return out


def indices_to_seqs(indices: np.ndarray, base: int, n: int) -> np.ndarray:
    """Vectorized base-``base`` digit expansion, most significant first."""
    idx = np.asarray(indices, dtype=np.uint64)
    out = np.empty((idx.size, n), dtype=np.int64)
    if base & (base - 1) == 0:
        shift = base.bit_length() - 1
        mask = np.uint64(base - 1)
        for pos in range(n - 1, -1, -1):
            out[:, pos] = (
                (idx >> np.uint64(shift * (n - 1 - pos))) & mask
            ).astype(np.int64)
        return out
    b = np.uint64(base)
    for pos in range(n - 1, -1, -1):
        out[:, pos] = (idx % b).astype(np.int64)
        idx = idx // b
    return out


# --------------------------------------------------------------------------
# sizes and rates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CodeSizes:
    """Integer codebook/bin sizes and the per-trial description length."""

    n: int
    s2_bins: int
    u0_words: int
    u0_bins: int
    u1_words: int
    u1_bins: int

    @property
    def bits(self) -> int:
        return sum(
            max(0, int(np.ceil(np.log2(k)))) if k > 1 else 0
            for k in (self.s2_bins, self.u0_bins, self.u1_bins)
        )


def _pow2_count(n: int, rate: float) -> int:
    return max(1, int(np.ceil(2.0 ** (n * rate) - 1e-9)))


def code_sizes(n: int, rates: SchemeRates) -> CodeSizes:
    return CodeSizes(
        n=n,
        s2_bins=_pow2_count(n, rates.r2),
        u0_words=_pow2_count(n, rates.r0),
        u0_bins=_pow2_count(n, rates.r0p),
        u1_words=_pow2_count(n, rates.r1),
        u1_bins=_pow2_count(n, rates.r1p),
    )


# --------------------------------------------------------------------------
# outcome types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodeFailure:
    reason: str  # "s2_atypical" | "u0_covering" | "u1_covering"


@dataclass(frozen=True)
class Encoded:
    w2: int
    w0p: int
    w1p: int
    w0: int
    w1: int
    u0: np.ndarray
    u1: np.ndarray


@dataclass(frozen=True)
class DecodeError:
    reason: str  # "none" | "ambiguous"


@dataclass(frozen=True)
class Decoded2:
    s2: np.ndarray
    u0: np.ndarray


@dataclass(frozen=True)
class Decoded1:
    s2: np.ndarray
    s1: np.ndarray


@dataclass(frozen=True)
class TrialStats:
    trials: int
    encode_failures: int
    decode1_errors: int
    decode2_errors: int
    empirical_Pe: float
    avg_d1: float
    bits_per_trial: int
    blocklength: int

    @property
    def total_rate(self) -> float:
        return self.bits_per_trial / self.blocklength


@dataclass(frozen=True)
class TrialRecord:
    encode_ok: bool
    decode2_ok: bool
    decode2_u0_ok: bool
    decode1_ok: bool
    d1: float


# --------------------------------------------------------------------------
# the scheme
# --------------------------------------------------------------------------


def _law_from_joint(joint: np.ndarray, keep: tuple[int, ...]) -> np.ndarray:
    """Marginal of the composed joint, axes ordered as in ``keep``."""
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    reduced = joint.sum(axis=drop)
    kept_sorted = tuple(sorted(keep))
    perm = tuple(kept_sorted.index(a) for a in keep)
    return np.transpose(reduced, perm)


def _cond_cdf(weights: np.ndarray) -> np.ndarray:
    """Normalize the last axis into a cdf; zero rows become uniform."""
    totals = weights.sum(axis=-1, keepdims=True)
    k = weights.shape[-1]
    cond = np.where(totals > 0, weights / np.where(totals > 0, totals, 1.0), 1.0 / k)
    return np.cumsum(cond, axis=-1)


def _draw_symbols(key: int, ws: np.ndarray, cdf_rows: np.ndarray) -> np.ndarray:
    """Draw codeword symbols for codeword indices ``ws``.

    ``cdf_rows`` has shape ``(n, k)``: one conditional cdf per position.
    """
    n = cdf_rows.shape[0]
    counters = ws.astype(np.uint64)[:, None] * np.uint64(n) + np.arange(
        n, dtype=np.uint64
    )
    u = counter_uniforms(key, counters)
    return (u[:, :, None] >= cdf_rows[None, :, :-1]).sum(axis=2)


class BinningScheme:
    """End-to-end simulator for one (source, channel, blocklength) setup."""

    def __init__(
        self,
        source: JointSource,
        channel: AuxChannel,
        n: int,
        rates: SchemeRates,
        epsilon: float,
        flavor: str = RELATIVE,
        d1: np.ndarray | None = None,
        max_codebook: int = DEFAULT_MAX_CODEBOOK,
        max_candidates: int = DEFAULT_MAX_CANDIDATES,
    ):
        if channel.kind != ONE_DISTORTION:
            raise ValueError("the simulator covers (U0, U1) channels")
        if not 1 <= n <= MAX_BLOCKLENGTH:
            raise BudgetError(f"blocklength {n} outside [1, {MAX_BLOCKLENGTH}]")
        self.source = source
        self.channel = channel
        self.n = n
        self.rates = rates
        self.epsilon = epsilon
        self.flavor = flavor
        self.sizes = code_sizes(n, rates)
        if max(self.sizes.u0_words, self.sizes.u1_words) > max_codebook:
            raise BudgetError(
                f"codebook of {max(self.sizes.u0_words, self.sizes.u1_words)} "
                f"codewords exceeds the budget of {max_codebook}"
            )

        n1, n2, m1, m2 = source.sizes
        self.n1, self.n2, self.m1, self.m2 = n1, n2, m1, m2
        full = compose(source, channel)
        joint = full.pmf.probs  # (u0, u1, s1, s2, y1, y2)
        self.k0, self.k1 = joint.shape[0], joint.shape[1]

        self.s2_space = n2 ** n
        worst_cands = -(-self.s2_space // self.sizes.s2_bins)
        if worst_cands > max_candidates:
            raise BudgetError(
                f"up to {worst_cands} source candidates per bin exceeds the "
                f"budget of {max_candidates}"
            )

        self.d1 = np.asarray(d1, dtype=float) if d1 is not None else hamming(n1)
        self.phi, _ = optimal_phi(full, self.d1)

        # reference laws (axis orders fixed per law)
        t = lambda law: TypicalityTest(law, n, epsilon, flavor)
        axes = {"U0": 0, "U1": 1, "S1": 2, "S2": 3, "Y1": 4, "Y2": 5}
        law = lambda *names: _law_from_joint(joint, tuple(axes[x] for x in names))
        self.t_s2 = t(law("S2"))
        self.t_cover0 = t(law("U0", "S2", "S1"))
        self.t_cover1 = t(law("U1", "U0", "S2", "S1"))
        self.t_dec2 = t(law("U0", "S2", "Y2"))
        self.t_dec1 = t(law("U1", "U0", "S2", "Y1"))
        relax = lambda m: float(m) if flavor == ABSOLUTE else 1.0
        self.t_s2y2 = TypicalityTest(
            law("S2", "Y2"), n, epsilon, flavor, relax=relax(self.k0)
        )
        self.t_s2y1 = TypicalityTest(
            law("S2", "Y1"), n, epsilon, flavor, relax=relax(self.k0 * self.k1)
        )
        self.t_u0s2y1 = TypicalityTest(
            law("U0", "S2", "Y1"), n, epsilon, flavor, relax=relax(self.k1)
        )

        # per-position samplers
        self.cdf_u0 = _cond_cdf(law("S2", "U0"))  # (s2, u0)
        self.cdf_u1 = _cond_cdf(law("U0", "S2", "U1"))  # (u0, s2, u1)
        self.source_flat = source.pmf.probs.ravel()

    # -- codebooks -----------------------------------------------------------

    def codebooks(self, seed: int) -> "Codebooks":
        return Codebooks(self, seed)

    # -- encoding ---------------------------------------------------------------

    def encode(self, cb: "Codebooks", s1: np.ndarray, s2: np.ndarray):
        """Bin the source component and cover it with the two codebooks."""
        s1 = np.asarray(s1, dtype=np.int64)
        s2 = np.asarray(s2, dtype=np.int64)
        if s1.shape != (self.n,) or s2.shape != (self.n,):
            raise ValueError(f"sequences must have length {self.n}")
        if not self.t_s2.check_sequence_cells(s2):
            return EncodeFailure("s2_atypical")
        s2_idx = seq_to_index(s2, self.n2)
        w2 = cb.s2_bin(s2_idx)

        # cover (u0, s2, s1): cells are u0 * (n2 * n1) + s2 * n1 + s1
        book0 = cb.u0_book(s2_idx, s2)
        w0 = self._cover_search(
            book0,
            self.sizes.u0_words,
            self.t_cover0,
            s2 * self.n1 + s1,
            self.n2 * self.n1,
            (s2[None, :], s1[None, :]),
        )
        if w0 is None:
            return EncodeFailure("u0_covering")
        u0 = book0.draw(np.array([w0]))[0]

        # cover (u1, u0, s2, s1)
        book1 = cb.u1_book(s2_idx, w0, u0, s2)
        w1 = self._cover_search(
            book1,
            self.sizes.u1_words,
            self.t_cover1,
            (u0 * self.n2 + s2) * self.n1 + s1,
            self.k0 * self.n2 * self.n1,
            (u0[None, :], s2[None, :], s1[None, :]),
        )
        if w1 is None:
            return EncodeFailure("u1_covering")
        u1 = book1.draw(np.array([w1]))[0]
        return Encoded(
            w2=w2,
            w0p=book0.bin_of(w0),
            w1p=book1.bin_of(w1),
            w0=w0,
            w1=w1,
            u0=u0,
            u1=u1,
        )

    def _typical_rows(self, test, symbols, fixed, stride, pos_idx):
        """Rows of a codeword batch jointly typical with the fixed sequences.

        Rows touching a zero-probability cell are dropped by a positionwise
        lookup before any counting.
        """
        ok = test.positive[(symbols,) + pos_idx].all(axis=1)
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            return hits
        cells = symbols[hits] * stride + fixed[None, :]
        ok2 = test.check_counts(type_counts(cells, test.cells))
        return hits[ok2]

    def _cover_search(self, book, words, test, fixed, stride, pos_idx, chunk=4096):
        for start in range(0, words, chunk):
            ws = np.arange(start, min(start + chunk, words), dtype=np.uint64)
            symbols = book.draw(ws)
            hits = self._typical_rows(test, symbols, fixed, stride, pos_idx)
            if hits.size:
                return int(ws[hits[0]])
        return None

    def _probe(self, book, bin_index, test, fixed, stride, pos_idx, chunk=2048):
        """Yield ``(w, codeword)`` for in-bin codewords passing ``test``."""
        for ws in book.in_bin_chunks(bin_index, chunk):
            symbols = book.draw(ws)
            for j in self._typical_rows(test, symbols, fixed, stride, pos_idx):
                yield int(ws[j]), symbols[j]

    # -- decoding ---------------------------------------------------------------

    def _iter_candidates(self, cb: "Codebooks", w2: int, y: np.ndarray, pair_test):
        """Yield binned source candidates surviving membership and pair
        pruning, in enumeration order, materializing chunk by chunk.

        The pair law's zero cells give a cheap positionwise prefilter; count
        bounds (relaxed, so no jointly typical candidate is lost) are only
        evaluated on prefilter survivors.
        """
        idxs, seqs = cb.s2_candidates(w2)
        allowed = pair_test.positive  # (|S2|, |Y|)
        pair_cols = pair_test.positive.shape[1]
        for start in range(0, idxs.size, 8192):
            idx_c = idxs[start:start + 8192]
            seq_c = seqs[start:start + 8192]
            ok = allowed[seq_c, y[None, :]].all(axis=1)
            if not ok.any():
                continue
            sub_idx = idx_c[ok]
            sub_seq = seq_c[ok]
            keep = self.t_s2.check_counts(type_counts(sub_seq, self.n2))
            cells = sub_seq * pair_cols + y[None, :]
            keep &= pair_test.check_counts(type_counts(cells, pair_test.cells))
            for j in np.flatnonzero(keep):
                yield int(sub_idx[j]), sub_seq[j]

    def decode2(self, cb: "Codebooks", w2: int, w0p: int, y2: np.ndarray):
        """Find the unique binned pair jointly typical with ``y2``."""
        y2 = np.asarray(y2, dtype=np.int64)
        found: dict[tuple[int, bytes], tuple[np.ndarray, np.ndarray]] = {}
        for s2_idx, s2_seq in self._iter_candidates(cb, w2, y2, self.t_s2y2):
            book = cb.u0_book(s2_idx, s2_seq)
            probes = self._probe(
                book,
                w0p,
                self.t_dec2,
                s2_seq * self.m2 + y2,
                self.n2 * self.m2,
                (s2_seq[None, :], y2[None, :]),
            )
            for _, u0_seq in probes:
                found[(s2_idx, u0_seq.tobytes())] = (s2_seq, u0_seq)
                if len(found) >= 2:
                    return DecodeError("ambiguous")
        if not found:
            return DecodeError("none")
        s2_seq, u0_seq = next(iter(found.values()))
        return Decoded2(s2=s2_seq, u0=u0_seq)

    def decode1(
        self, cb: "Codebooks", w2: int, w0p: int, w1p: int, y1: np.ndarray
    ):
        """Find the unique binned triple jointly typical with ``y1`` and map
        it through the reconstruction function."""
        y1 = np.asarray(y1, dtype=np.int64)
        found: dict[tuple, tuple] = {}
        for s2_idx, s2_seq in self._iter_candidates(cb, w2, y1, self.t_s2y1):
            book0 = cb.u0_book(s2_idx, s2_seq)
            # candidate common codewords, loosely screened before the
            # individual books are touched
            probes0 = self._probe(
                book0,
                w0p,
                self.t_u0s2y1,
                s2_seq * self.m1 + y1,
                self.n2 * self.m1,
                (s2_seq[None, :], y1[None, :]),
            )
            for w0, u0_seq in probes0:
                book1 = cb.u1_book(s2_idx, w0, u0_seq, s2_seq)
                probes1 = self._probe(
                    book1,
                    w1p,
                    self.t_dec1,
                    (u0_seq * self.n2 + s2_seq) * self.m1 + y1,
                    self.k0 * self.n2 * self.m1,
                    (u0_seq[None, :], s2_seq[None, :], y1[None, :]),
                )
                for _, u1_seq in probes1:
                    key = (s2_idx, u0_seq.tobytes(), u1_seq.tobytes())
                    found[key] = (s2_seq, u0_seq, u1_seq)
                    if len(found) >= 2:
                        return DecodeError("ambiguous")
        if not found:
            return DecodeError("none")
        s2_seq, u0_seq, u1_seq = next(iter(found.values()))
        s1_hat = self.phi.table[u0_seq, u1_seq, s2_seq, y1]
        return Decoded1(s2=s2_seq, s1=s1_hat)

    # -- Monte-Carlo driver -------------------------------------------------------

    def run_trials(
        self,
        trials: int,
        seed: int,
        regen_every: int = 1,
        audit: bool = False,
    ) -> TrialStats | tuple[TrialStats, list[TrialRecord]]:
        """Fresh i.i.d. source blocks per trial; codebooks are re-keyed every
        ``regen_every`` trials to average over the code ensemble.

        A trial counts as an error when encoding fails or either decoder
        misses the true source component; failed trials contribute the
        worst-case distortion to ``avg_d1``.
        """
        if trials < 1 or regen_every < 1:
            raise ValueError("trials and regen_every must be >= 1")
        d1_max = float(self.d1.max())
        shape = self.source.pmf.probs.shape
        enc_fail = dec1_err = dec2_err = err_trials = 0
        d1_total = 0.0
        records: list[TrialRecord] = []
        cb = None
        cb_epoch = -1
        for t in range(trials):
            epoch = t // regen_every
            if epoch != cb_epoch:
                cb = self.codebooks(derive_key(seed, 0xB00C, epoch))
                cb_epoch = epoch
            rng = np.random.default_rng(derive_key(seed, 0x7A1A, t))
            flat_idx = rng.choice(self.source_flat.size, self.n, p=self.source_flat)
            s1, s2, y1, y2 = np.unravel_index(flat_idx, shape)

            enc = self.encode(cb, s1, s2)
            if isinstance(enc, EncodeFailure):
                enc_fail += 1
                err_trials += 1
                d1_total += d1_max
                if audit:
                    records.append(TrialRecord(False, False, False, False, d1_max))
                continue

            out2 = self.decode2(cb, enc.w2, enc.w0p, y2)
            ok2 = isinstance(out2, Decoded2) and bool(np.all(out2.s2 == s2))
            ok2_u0 = isinstance(out2, Decoded2) and bool(np.all(out2.u0 == enc.u0))
            if not ok2:
                dec2_err += 1

            out1 = self.decode1(cb, enc.w2, enc.w0p, enc.w1p, y1)
            ok1 = isinstance(out1, Decoded1) and bool(np.all(out1.s2 == s2))
            if ok1:
                d1_trial = float(self.d1[s1, out1.s1].mean())
            else:
                dec1_err += 1
                d1_trial = d1_max
            d1_total += d1_trial
            if not (ok1 and ok2):
                err_trials += 1
            if audit:
                records.append(
                    TrialRecord(True, ok2, ok2_u0, ok1, d1_trial)
                )
        stats = TrialStats(
            trials=trials,
            encode_failures=enc_fail,
            decode1_errors=dec1_err,
            decode2_errors=dec2_err,
            empirical_Pe=err_trials / trials,
            avg_d1=d1_total / trials,
            bits_per_trial=self.sizes.bits,
            blocklength=self.n,
        )
        return (stats, records) if audit else stats


class _Book:
    """One lazily drawn codebook plus its bin permutation."""

    def __init__(self, key: int, words: int, bins: int, cdf_rows: np.ndarray):
        self.key = key
        self.words = words
        self.bins = bins
        self.cdf_rows = cdf_rows
        self.perm = IndexPermutation(words, derive_key(key, 0xB115))

    def draw(self, ws: np.ndarray) -> np.ndarray:
        return _draw_symbols(self.key, np.asarray(ws, dtype=np.uint64), self.cdf_rows)

    def bin_of(self, w: int) -> int:
        return self.perm.forward(w) % self.bins

    def in_bin_chunks(self, b: int, chunk: int = 2048):
        """Codeword indices of bin ``b``, materialized chunk by chunk in
        deterministic enumeration order."""
        for start in range(b, self.words, self.bins * chunk):
            vals = np.arange(
                start, min(start + self.bins * chunk, self.words), self.bins,
                dtype=np.uint64,
            )
            if vals.size:
                yield self.perm.inverse_array(vals)

    def in_bin(self, b: int) -> np.ndarray:
        vals = np.arange(b, self.words, self.bins, dtype=np.uint64)
        if vals.size == 0:
            return vals
        return np.sort(self.perm.inverse_array(vals))


class Codebooks:
    """Handle to the (implicit) random codebooks of one ensemble draw."""

    def __init__(self, scheme: BinningScheme, seed: int):
        self.scheme = scheme
        self.seed = int(seed)
        self.s2_perm = IndexPermutation(
            scheme.s2_space, derive_key(self.seed, 0x52B1)
        )
        self._u0_cache: dict[int, _Book] = {}
        self._u1_cache: dict[tuple[int, int], _Book] = {}
        self._candidates: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def s2_bin(self, s2_idx: int) -> int:
        return self.s2_perm.forward(s2_idx) % self.scheme.sizes.s2_bins

    def s2_candidates(self, w2: int) -> tuple[np.ndarray, np.ndarray]:
        """All binned-domain indices in bin ``w2`` with their sequences."""
        cached = self._candidates.get(w2)
        if cached is not None:
            return cached
        scheme = self.scheme
        vals = np.arange(
            w2, scheme.s2_space, scheme.sizes.s2_bins, dtype=np.uint64
        )
        if vals.size:
            idxs = self.s2_perm.inverse_array(vals)
            seqs = indices_to_seqs(idxs, scheme.n2, scheme.n)
        else:
            idxs = np.empty((0,), dtype=np.uint64)
            seqs = np.empty((0, scheme.n), dtype=np.int64)
        if len(self._candidates) > 8:
            self._candidates.clear()
        self._candidates[w2] = (idxs, seqs)
        return idxs, seqs

    def u0_book(self, s2_idx: int, s2_seq: np.ndarray) -> _Book:
        book = self._u0_cache.get(s2_idx)
        if book is None:
            book = _Book(
                derive_key(self.seed, 0x0B0, s2_idx),
                self.scheme.sizes.u0_words,
                self.scheme.sizes.u0_bins,
                self.scheme.cdf_u0[s2_seq],
            )
            if len(self._u0_cache) > 4096:
                self._u0_cache.clear()
            self._u0_cache[s2_idx] = book
        return book

    def u1_book(
        self, s2_idx: int, w0: int, u0_seq: np.ndarray, s2_seq: np.ndarray
    ) -> _Book:
        cache_key = (s2_idx, w0)
        book = self._u1_cache.get(cache_key)
        if book is None:
            book = _Book(
                derive_key(self.seed, 0x0B1, s2_idx, w0),
                self.scheme.sizes.u1_words,
                self.scheme.sizes.u1_bins,
                self.scheme.cdf_u1[u0_seq, s2_seq],
            )
            if len(self._u1_cache) > 4096:
                self._u1_cache.clear()
            self._u1_cache[cache_key] = book
        return book


def run_trials(
    source: JointSource,
    channel: AuxChannel,
    n: int,
    rates: SchemeRates,
    epsilon: float,
    trials: int,
    seed: int,
    flavor: str = RELATIVE,
    regen_every: int = 1,
    d1: np.ndarray | None = None,
) -> TrialStats:
    """One-call Monte-Carlo run of the layered binning scheme."""
    scheme = BinningScheme(source, channel, n, rates, epsilon, flavor, d1=d1)
    return scheme.run_trials(trials, seed, regen_every=regen_every)
