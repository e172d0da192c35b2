"""Typed-codebook agreement protocol over a genie index link.

One terminal observes a source block, encodes it to the first codebook
word jointly typical with it, and ships the word's row index through an
index channel that delivers correctly except with probability theta. The
other terminal observes the correlated block plus the received row index
and bets on the unique jointly typical word inside that row. Both sides
fall back to a reserved constant word when nothing (or too much) matches.
The two outputs form the common-randomness pair (K, L) whose agreement,
cardinality, and uniformity this module measures, by Monte Carlo for
large blocks and by exact enumeration for small binary ones.

Two evaluation engines back run_monte_carlo. The materialized engine
draws the full codebook and scans it. The statistical engine serves
configs whose codebook exceeds the memory guard (deterministic binary
auxiliaries only): it replaces the codebook by its sufficient statistics,
drawing presence of a value via its Poissonized occupancy and spurious
row matches via an exact type-class match probability, so the per-trial
law matches a materialized run up to collision terms that are negligible
in exactly the regimes that need this engine.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GuardError, InternalInvariantError, ValidationError
from .probspace import (
    JointPmf,
    Pmf,
    TypicalityParams,
    as_rng,
    compose_aux,
    entropy_bits,
    sample_iid,
    subseed,
    type_counts,
)
from .ucrcap import AuxiliaryChannel

_LN2 = math.log(2.0)
_CODEBOOK_KEY = 23
_TRIAL_KEY = 29
_ROW_KEY = 31
MEMORY_GUARD = 10 ** 9          # codebook symbols
EXACT_PAIR_GUARD = 2 ** 20      # enumerated (x^n, y^n) pairs
EXACT_SCAN_GUARD = 2 * 10 ** 7  # words x sequences typicality cells
_VALUE_DICT_MAX = 10 ** 7       # first-occurrence map size cutoff
FALLBACK = None                 # index marker for the reserved word


def pow2_floor(bits: float) -> int:
    """floor(2**bits) as an exact integer, usable far beyond float range.

    For bits >= 53 the result is the canonical rounding m * 2^(bits-53)
    with m the 53-bit mantissa floor; the input is itself a float, so
    digits below its precision are not claimed.
    """
    if bits < 0.0:
        return 0
    if bits < 53.0:
        return math.floor(2.0 ** bits)
    i = math.floor(bits)
    m = math.floor(2.0 ** (bits - i) * (1 << 53))
    return m << (i - 53)


def _uniform_int(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in 1..n for arbitrarily large n (rejection on bits)."""
    if n < 1:
        raise ValidationError(f"uniform draw needs n >= 1, got {n}")
    if n <= 2 ** 62:
        return int(rng.integers(1, n + 1))
    k = (n - 1).bit_length()
    nbytes = (k + 7) // 8
    mask = (1 << k) - 1
    while True:
        v = int.from_bytes(rng.bytes(nbytes), "little") & mask
        if v < n:
            return v + 1


def _value_seed_key(value: bytes) -> tuple[int, ...]:
    digest = hashlib.sha256(value).digest()
    return tuple(int.from_bytes(digest[4 * i: 4 * i + 4], "little") for i in range(4))


@dataclass(frozen=True)
class ProtocolConfig:
    """Full description of one protocol run.

    n: block length; mu: rate margin in bits; theta: index channel error
    probability; eps_typ: robust-typicality tolerance; aux: channel from
    the X alphabet to the codeword alphabet; source: joint block law.

    The row/column counts follow the construction's exponents: N1 counts
    rows at rate I(U;X) - I(U;Y) + 3*mu and N2 columns at I(U;Y) - 2*mu.
    A raw N2 < 1 means the margin swallowed the column rate; that config
    is rejected unless allow_degenerate_rate clamps N2 to 1.
    """

    n: int
    mu: float
    theta: float
    eps_typ: float
    aux: AuxiliaryChannel
    source: JointPmf
    seed: int = 0
    allow_degenerate_rate: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"block length must be a positive integer, got {self.n}")
        if not (self.mu > 0.0):
            raise ValidationError(f"rate margin mu must be > 0, got {self.mu}")
        if not (0.0 <= self.theta < 1.0):
            raise ValidationError(f"theta must be in [0, 1), got {self.theta}")
        if not (0.0 < self.eps_typ < 1.0):
            raise ValidationError(f"eps_typ must be in (0, 1), got {self.eps_typ}")
        if self.aux.x_card != self.source.nx:
            raise ValidationError(
                f"aux input alphabet {self.aux.x_card} does not match source X alphabet "
                f"{self.source.nx}")
        if self.n2_raw < 1 and not self.allow_degenerate_rate:
            raise ValidationError(
                f"I(U;Y) - 2*mu = {self.i_uy - 2 * self.mu:.6f} yields N2 = 0; shrink mu "
                "or set allow_degenerate_rate=True to clamp N2 to 1")

    @cached_property
    def _triple(self):
        return compose_aux(self.source, self.aux.cond)

    @cached_property
    def i_ux(self) -> float:
        from .probspace import mutual_information
        return mutual_information(self._triple.pair_ux())

    @cached_property
    def i_uy(self) -> float:
        from .probspace import mutual_information
        return mutual_information(self._triple.pair_uy())

    @cached_property
    def p_u(self) -> np.ndarray:
        return self._triple.marginal(0).probs

    @cached_property
    def n1(self) -> int:
        return max(pow2_floor(self.n * (self.i_ux - self.i_uy + 3.0 * self.mu)), 1)

    @cached_property
    def n2_raw(self) -> int:
        return pow2_floor(self.n * (self.i_uy - 2.0 * self.mu))

    @cached_property
    def n2(self) -> int:
        return max(self.n2_raw, 1)

    @property
    def u_card(self) -> int:
        return self.aux.u_card

    @property
    def typicality(self) -> TypicalityParams:
        return TypicalityParams(self.eps_typ)

    @cached_property
    def pair_ux_ext(self) -> np.ndarray:
        """Reference (u, x) law with a zero row for the reserved symbol."""
        probs = self._triple.pair_ux().probs
        return np.vstack([probs, np.zeros((1, probs.shape[1]))])

    @cached_property
    def pair_uy_ext(self) -> np.ndarray:
        probs = self._triple.pair_uy().probs
        return np.vstack([probs, np.zeros((1, probs.shape[1]))])

    @property
    def k_cardinality(self) -> int:
        return self.n1 * self.n2 + 1

    @property
    def log2_k_cardinality(self) -> float:
        return math.log2(self.k_cardinality)

    @property
    def cardinality_bound_log2(self) -> float:
        return self.n * (self.i_ux + self.mu + 1.0)

    @property
    def cardinality_ok(self) -> bool:
        return self.log2_k_cardinality <= self.cardinality_bound_log2 + 1e-9

    @property
    def codebook_symbols(self) -> int:
        return self.n1 * self.n2 * self.n


@dataclass(frozen=True)
class Codebook:
    """N1 x N2 words of one exact quantized type, plus the reserved word.

    The fallback word repeats the extra symbol u_card, which has zero mass
    under the reference pair law; robust typicality therefore rejects it
    against every sequence, as the construction requires. first_index maps
    a word's bytes to its first (row, column) in row-major order (1-based)
    and is None when the codebook is too large to index.
    """

    words: np.ndarray
    fallback: np.ndarray
    n1: int
    n2: int
    pair_ux: np.ndarray
    pair_uy: np.ndarray
    eps_typ: float
    det_map: np.ndarray | None
    first_index: dict | None

    @property
    def n(self) -> int:
        return self.words.shape[2]

    def word(self, i: int, j: int) -> np.ndarray:
        return self.words[i - 1, j - 1]

    def row(self, i: int) -> np.ndarray:
        return self.words[i - 1]


def _pair_counts(words_2d: np.ndarray, seq: np.ndarray, n_a: int, n_b: int) -> np.ndarray:
    """Per-word joint symbol counts of (word, seq): shape (W, n_a * n_b)."""
    cells = words_2d.astype(np.int64) * n_b + seq[None, :]
    out = np.empty((words_2d.shape[0], n_a * n_b), dtype=np.int64)
    for c in range(n_a * n_b):
        out[:, c] = (cells == c).sum(axis=1)
    return out


def _batch_pair_typical(words_2d: np.ndarray, seq: np.ndarray, ref: np.ndarray,
                        eps: float) -> np.ndarray:
    """Robust joint typicality of each word against one sequence."""
    n = seq.shape[0]
    p = ref.ravel()
    counts = _pair_counts(words_2d, seq, ref.shape[0], ref.shape[1])
    return np.all(np.abs(counts - n * p[None, :]) <= eps * n * p[None, :], axis=1)


def _pair_typical_single(u_seq: np.ndarray, seq: np.ndarray, ref: np.ndarray,
                         eps: float) -> bool:
    return bool(_batch_pair_typical(u_seq[None, :], seq, ref, eps)[0])


def build_codebook(cfg: ProtocolConfig) -> Codebook:
    """Draw the full codebook: i.i.d. uniform draws from one type class."""
    symbols = cfg.codebook_symbols
    if symbols > MEMORY_GUARD:
        raise GuardError(
            f"codebook holds {float(symbols):.3e} symbols (> {MEMORY_GUARD:.0e}); lower n "
            "or mu, or rely on run_monte_carlo's statistical engine for this config")
    counts = type_counts(Pmf(cfg.p_u), cfg.n)
    base = np.repeat(np.arange(cfg.u_card), counts)
    dtype = np.int8 if cfg.u_card < 127 else np.int16
    rng = as_rng(subseed(cfg.seed, _CODEBOOK_KEY))
    flat = np.tile(base.astype(dtype), (cfg.n1 * cfg.n2, 1))
    flat = rng.permuted(flat, axis=1)
    words = flat.reshape(cfg.n1, cfg.n2, cfg.n)
    fallback = np.full(cfg.n, cfg.u_card, dtype=dtype)

    det_map = None
    if cfg.aux.cond.is_deterministic():
        det_map = np.argmax(cfg.aux.cond.rows, axis=1).astype(dtype)

    first_index = None
    if cfg.n1 * cfg.n2 <= _VALUE_DICT_MAX:
        first_index = {}
        w = 0
        for i in range(cfg.n1):
            for j in range(cfg.n2):
                first_index.setdefault(flat[w].tobytes(), (i + 1, j + 1))
                w += 1
    return Codebook(words, fallback, cfg.n1, cfg.n2, cfg.pair_ux_ext, cfg.pair_uy_ext,
                    cfg.eps_typ, det_map, first_index)


def _encode_detail(cb: Codebook, x: np.ndarray, eps: float):
    """Returns (word_value, (i, j) or FALLBACK, i_star)."""
    if x.shape[0] != cb.n:
        raise ValidationError(f"sequence length {x.shape[0]} != block length {cb.n}")
    if cb.det_map is not None and cb.first_index is not None:
        u_seq = cb.det_map[x]
        if _pair_typical_single(u_seq, x, cb.pair_ux, eps):
            hit = cb.first_index.get(u_seq.tobytes())
            if hit is not None:
                return u_seq, hit, hit[0]
        return cb.fallback, FALLBACK, cb.n1 + 1
    flat = cb.words.reshape(cb.n1 * cb.n2, cb.n)
    chunk = 65536
    for start in range(0, flat.shape[0], chunk):
        mask = _batch_pair_typical(flat[start:start + chunk], x, cb.pair_ux, eps)
        if mask.any():
            w = start + int(np.argmax(mask))
            i, j = w // cb.n2 + 1, w % cb.n2 + 1
            return flat[w], (i, j), i
    return cb.fallback, FALLBACK, cb.n1 + 1


def encode_phi(cb: Codebook, x: np.ndarray, tp: TypicalityParams | None = None):
    """First jointly typical word in row-major order, or the fallback.

    Returns (word, i_star) with i_star = N1 + 1 signalling the fallback.
    """
    eps = cb.eps_typ if tp is None else tp.eps_typ
    word, _, i_star = _encode_detail(cb, np.asarray(x), eps)
    return word, i_star


def transmit_index(i_star: int, n1: int, theta: float, seed) -> int:
    """Genie index channel: correct with probability 1 - theta, else a
    uniformly random different index in 1..n1+1.

    The alternative index is drawn even when unused so that runs with
    different theta share one randomness stream (coupled trials).
    """
    if not (0.0 <= theta < 1.0):
        raise ValidationError(f"theta must be in [0, 1), got {theta}")
    if not (1 <= i_star <= n1 + 1):
        raise ValidationError(f"index {i_star} outside 1..{n1 + 1}")
    rng = as_rng(seed)
    u = rng.random()
    alt = _uniform_int(rng, n1)
    if alt >= i_star:
        alt += 1
    return i_star if u >= theta else alt


def _decode_detail(cb: Codebook, y: np.ndarray, i_tilde: int, eps: float):
    """Returns (word_value, (i, j) or FALLBACK, distinct_typical_count)."""
    if y.shape[0] != cb.n:
        raise ValidationError(f"sequence length {y.shape[0]} != block length {cb.n}")
    if not (1 <= i_tilde <= cb.n1 + 1):
        raise ValidationError(f"received index {i_tilde} outside 1..{cb.n1 + 1}")
    if i_tilde == cb.n1 + 1:
        return cb.fallback, FALLBACK, 0
    row = cb.words[i_tilde - 1]
    mask = _batch_pair_typical(row, y, cb.pair_uy, eps)
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return cb.fallback, FALLBACK, 0
    values = np.unique(row[hits], axis=0)
    if values.shape[0] != 1:
        return cb.fallback, FALLBACK, int(values.shape[0])
    j = int(hits[0]) + 1
    return row[hits[0]], (i_tilde, j), 1


def decode_psi(cb: Codebook, y: np.ndarray, i_tilde: int,
               tp: TypicalityParams | None = None) -> np.ndarray:
    """Unique jointly typical word value in the received row, else fallback.

    Duplicate words with the same value count once: ambiguity means two or
    more distinct values pass the typicality test.
    """
    eps = cb.eps_typ if tp is None else tp.eps_typ
    word, _, _ = _decode_detail(cb, np.asarray(y), i_tilde, eps)
    return word


@dataclass(frozen=True)
class TrialOutcome:
    """One protocol execution.

    k_index / l_index are (row, column) of the produced word value, or
    None for the reserved fallback word; agreement compares word VALUES
    (duplicate draws of one value are the same common-randomness symbol).
    Under the statistical engine a spurious match reports column 0.
    """

    trial: int
    k_index: tuple[int, int] | None
    l_index: tuple[int, int] | None
    index_sent: int
    index_received: int
    agreed: bool


_EVENT_NAMES = ("encoder_fallback", "index_error", "decoder_miss",
                "decoder_ambiguous", "spurious_match")


@dataclass(frozen=True)
class MonteCarloResult:
    """Aggregate of run_monte_carlo.

    entropy_k_bits carries the Miller-Madow correction on top of the
    plug-in estimate; both are biased low for severely undersampled K, so
    exact_analyze is preferred for uniformity conditions when feasible.
    """

    trials: int
    p_disagree: float
    event_counts: dict
    entropy_k_bits: float
    entropy_k_plugin_bits: float
    distinct_k: int
    n: int
    n1: int
    n2: int
    k_cardinality: int
    log2_k_cardinality: float
    uniformity_gap_bits: float
    theta: float
    seed: int
    engine: str
    outcomes: tuple | None
    entropy_l_bits: float | None = None


def _entropy_estimates(counter: dict, trials: int) -> tuple[float, float, int]:
    counts = np.array(list(counter.values()), dtype=float)
    p = counts / trials
    plugin = float(-(p * np.log2(p)).sum())
    mm = plugin + (len(counts) - 1) / (2.0 * trials * _LN2)
    return mm, plugin, len(counts)


def _materialized_trial(cb: Codebook, cfg: ProtocolConfig, t: int):
    rng = as_rng(subseed(cfg.seed, _TRIAL_KEY, t))
    x, y = sample_iid(cfg.source, cfg.n, rng)
    k_word, k_idx, i_star = _encode_detail(cb, x, cfg.eps_typ)
    u = rng.random()
    alt = _uniform_int(rng, cfg.n1)
    if alt >= i_star:
        alt += 1
    i_tilde = i_star if u >= cfg.theta else alt
    l_word, l_idx, distinct = _decode_detail(cb, y, i_tilde, cfg.eps_typ)
    return t, k_word, k_idx, i_star, i_tilde, l_word, l_idx, distinct


class _StatisticalEngine:
    """Codebook sufficient statistics for deterministic binary auxiliaries.

    Presence of a value in the codebook (or in one specific row) follows
    the Poissonized occupancy of n1*n2 (or n2) uniform type-class draws;
    spurious matches in a scanned row follow a Poisson law with mean
    n2 * q(y), where q(y) is the exact probability that a uniform
    type-class word is jointly typical with y, computed from the
    hypergeometric overlap count. Word values that collide with the
    trial's own value are handled separately, so the engine reproduces
    the duplicate-value agreement effect of small alphabets.
    """

    def __init__(self, cfg: ProtocolConfig):
        if not cfg.aux.cond.is_deterministic():
            raise GuardError(
                "statistical codebook engine needs a deterministic auxiliary; "
                "this config also exceeds the materialized-codebook guard")
        if cfg.u_card != 2 or cfg.source.ny != 2:
            raise GuardError(
                "statistical codebook engine supports binary auxiliary and output "
                "alphabets; lower n to reach the materialized path")
        self.cfg = cfg
        self.det_map = np.argmax(cfg.aux.cond.rows, axis=1)
        self.type = type_counts(Pmf(cfg.p_u), cfg.n)
        self.fallback = np.full(cfg.n, cfg.u_card, dtype=np.int8)
        self.log2_t = (math.lgamma(cfg.n + 1)
                       - sum(math.lgamma(c + 1) for c in self.type)) / _LN2
        self.log2_n1 = math.log2(cfg.n1)
        self.log2_n2 = math.log2(cfg.n2)
        self.pair_uy = cfg.pair_uy_ext[:2, :]
        self._q_cache: dict[int, float] = {}
        self._value_rows: dict[bytes, tuple[int, int] | None] = {}

    def _log2_choose(self, a: int, b: int) -> float:
        return (math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)) / _LN2

    def log2_q_y(self, k_zeros: int) -> float:
        """log2 P[uniform type-class word jointly typical with y]; y has
        k_zeros zeros. -inf when no overlap count passes."""
        if k_zeros in self._q_cache:
            return self._q_cache[k_zeros]
        n = self.cfg.n
        t0 = int(self.type[0])
        eps = self.cfg.eps_typ
        a_lo = max(0, t0 - (n - k_zeros))
        a_hi = min(t0, k_zeros)
        # counts as functions of the overlap a = #(u=0, y=0):
        # c00 = a; c01 = t0 - a; c10 = k - a; c11 = n - k - t0 + a
        specs = ((self.pair_uy[0, 0], 1, 0), (self.pair_uy[0, 1], -1, t0),
                 (self.pair_uy[1, 0], -1, k_zeros), (self.pair_uy[1, 1], 1, n - k_zeros - t0))
        for p, sign, off in specs:
            target = n * p
            tol = eps * n * p
            lo, hi = target - tol, target + tol
            if sign == 1:
                cell_lo, cell_hi = math.ceil(lo - off), math.floor(hi - off)
            else:
                cell_lo, cell_hi = math.ceil(off - hi), math.floor(off - lo)
            a_lo = max(a_lo, cell_lo)
            a_hi = min(a_hi, cell_hi)
        if a_lo > a_hi:
            self._q_cache[k_zeros] = -math.inf
            return -math.inf
        denom = self._log2_choose(n, t0)
        terms = [self._log2_choose(k_zeros, a) + self._log2_choose(n - k_zeros, t0 - a)
                 - denom for a in range(a_lo, a_hi + 1)]
        peak = max(terms)
        val = peak + math.log2(sum(2.0 ** (t - peak) for t in terms))
        self._q_cache[k_zeros] = val
        return val

    @staticmethod
    def _prob_from_log2(log2_lam: float) -> float:
        """1 - exp(-2^log2_lam), safely through the whole exponent range."""
        if log2_lam > 9.0:
            return 1.0
        if log2_lam < -60.0:
            return 0.0
        return -math.expm1(-(2.0 ** log2_lam))

    def value_rows(self, value: bytes) -> tuple[int, int] | None:
        """Global first-occurrence (row, column) of a present value, or None.

        Keyed by the value itself so the assignment is schedule-independent.
        """
        hit = self._value_rows.get(value)
        if hit is None and value not in self._value_rows:
            rng = as_rng(subseed(self.cfg.seed, _ROW_KEY, *_value_seed_key(value)))
            present = rng.random() < self._prob_from_log2(
                self.log2_n1 + self.log2_n2 - self.log2_t)
            if present:
                hit = (_uniform_int(rng, self.cfg.n1), _uniform_int(rng, self.cfg.n2))
            else:
                hit = None
            self._value_rows.setdefault(value, hit)
            hit = self._value_rows[value]
        return hit

    def trial(self, t: int):
        cfg = self.cfg
        rng = as_rng(subseed(cfg.seed, _TRIAL_KEY, t))
        x, y = sample_iid(cfg.source, cfg.n, rng)
        u_seq = self.det_map[x].astype(np.int8)
        exact_type = int((u_seq == 0).sum()) == int(self.type[0])
        typical_ux = _pair_typical_single(u_seq, x, cfg.pair_ux_ext, cfg.eps_typ)
        k_idx = None
        k_word = self.fallback
        if exact_type and typical_ux:
            k_idx = self.value_rows(u_seq.tobytes())
            if k_idx is not None:
                k_word = u_seq
        i_star = k_idx[0] if k_idx is not None else cfg.n1 + 1

        u = rng.random()
        alt = _uniform_int(rng, cfg.n1)
        if alt >= i_star:
            alt += 1
        i_tilde = i_star if u >= cfg.theta else alt

        if i_tilde == cfg.n1 + 1:
            return t, k_word, k_idx, i_star, i_tilde, self.fallback, None, 0

        # the trial's own value: in the scanned row either because the
        # encoder put it there, or as a duplicate occurrence elsewhere
        own_typical = exact_type and _pair_typical_single(
            u_seq, y, cfg.pair_uy_ext, cfg.eps_typ)
        own_in_row = k_idx is not None and i_tilde == k_idx[0]
        if own_typical and not own_in_row and self.value_rows(u_seq.tobytes()) is not None:
            p_dup = self._prob_from_log2(self.log2_n2 - self.log2_t)
            own_in_row = rng.random() < p_dup
        own_hit = own_typical and own_in_row

        log2_lam = self.log2_n2 + self.log2_q_y(int((y == 0).sum()))
        lam = 0.0 if log2_lam < -60.0 else 2.0 ** min(log2_lam, 40.0)
        spurious = int(rng.poisson(lam)) if lam > 0.0 else 0
        if own_hit and spurious > 0:
            # the Poisson mass counts all typical words; remove the own value's
            # expected share so it is not double-counted
            log2_share = -self.log2_t - self.log2_q_y(int((y == 0).sum()))
            share = 0.0 if log2_share < -60.0 else min(2.0 ** log2_share, 1.0)
            spurious = int(rng.binomial(spurious, max(1.0 - share, 0.0)))

        distinct = (1 if own_hit else 0) + spurious
        if distinct == 1 and own_hit:
            l_word, l_idx = u_seq, (i_tilde, (k_idx[1] if own_in_row and k_idx is not None
                                              and i_tilde == k_idx[0] else 0))
        elif distinct == 1:
            l_word, l_idx = np.array([-1], dtype=np.int8), (i_tilde, 0)
        else:
            l_word, l_idx = self.fallback, None
        return t, k_word, k_idx, i_star, i_tilde, l_word, l_idx, distinct


def run_monte_carlo(cfg: ProtocolConfig, trials: int, threads: int = 1,
                    keep_outcomes: bool = True) -> MonteCarloResult:
    """Fixed-codebook Monte Carlo over fresh source blocks.

    The codebook is drawn once per run from the seed's codebook child;
    each trial owns a seed child indexed by trial number, so results are
    identical for any thread count.
    """
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    if cfg.codebook_symbols <= MEMORY_GUARD:
        cb = build_codebook(cfg)
        engine = "materialized"
        runner = lambda t: _materialized_trial(cb, cfg, t)
    else:
        stat = _StatisticalEngine(cfg)
        engine = "statistical"
        runner = stat.trial

    if threads == 1:
        raw = [runner(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(runner, range(trials)))
        raw.sort(key=lambda r: r[0])

    events = {name: 0 for name in _EVENT_NAMES}
    counter: dict[bytes, int] = {}
    agree = 0
    outcomes = []
    for t, k_word, k_idx, i_star, i_tilde, l_word, l_idx, distinct in raw:
        key = k_word.tobytes()
        counter[key] = counter.get(key, 0) + 1
        agreed = k_word.shape == l_word.shape and bool(np.array_equal(k_word, l_word))
        agree += agreed
        if k_idx is None:
            events["encoder_fallback"] += 1
        if i_tilde != i_star:
            events["index_error"] += 1
        if distinct >= 2:
            events["decoder_ambiguous"] += 1
        if k_idx is not None and i_tilde == i_star and l_idx is None and distinct == 0:
            events["decoder_miss"] += 1
        if l_idx is not None and not agreed:
            events["spurious_match"] += 1
        if keep_outcomes:
            outcomes.append(TrialOutcome(t, k_idx, l_idx, i_star, i_tilde, agreed))

    mm, plugin, distinct_k = _entropy_estimates(counter, trials)
    log2_card = math.log2(cfg.k_cardinality)
    return MonteCarloResult(
        trials=trials,
        p_disagree=1.0 - agree / trials,
        event_counts=events,
        entropy_k_bits=mm,
        entropy_k_plugin_bits=plugin,
        distinct_k=distinct_k,
        n=cfg.n,
        n1=cfg.n1,
        n2=cfg.n2,
        k_cardinality=cfg.k_cardinality,
        log2_k_cardinality=log2_card,
        uniformity_gap_bits=abs(mm / cfg.n - log2_card / cfg.n),
        theta=cfg.theta,
        seed=cfg.seed,
        engine=engine,
        outcomes=tuple(outcomes) if keep_outcomes else None,
    )


@dataclass(frozen=True)
class ExactResult:
    """Closed-form push of the protocol through all source blocks."""

    p_disagree: float
    entropy_k_bits: float
    entropy_k_given_y_bits: float
    entropy_l_bits: float
    uniformity_gap_bits: float
    k_cardinality: int
    log2_k_cardinality: float
    claim_rate_bits: float
    n: int
    n1: int
    n2: int
    theta: float
    seed: int
    joint_ky: np.ndarray | None
    trials: None = None

    @property
    def p_err(self) -> float:
        return self.p_disagree


def _kron_power(mat: np.ndarray, n: int) -> np.ndarray:
    out = np.array([[1.0]]) if mat.ndim == 2 else np.array([1.0])
    for _ in range(n):
        out = np.kron(out, mat)
    return out


def exact_analyze(cfg: ProtocolConfig, include_joint: bool = True) -> ExactResult:
    """Exact protocol law by enumerating every (x^n, y^n) pair.

    Binary source alphabets only; the codebook is materialized with the
    same seed child as run_monte_carlo, so both modes study one codebook.
    The index channel is averaged in closed form: the received index is
    correct with weight 1 - theta and uniform over the other rows with
    weight theta / N1.
    """
    if cfg.source.nx != 2 or cfg.source.ny != 2:
        raise GuardError("exact analysis enumerates binary source alphabets only")
    pairs = (cfg.source.nx * cfg.source.ny) ** cfg.n
    if pairs > EXACT_PAIR_GUARD:
        raise GuardError(
            f"exact analysis would enumerate {pairs:.3e} sequence pairs; lower n")
    cb = build_codebook(cfg)
    n, n1, n2 = cfg.n, cfg.n1, cfg.n2
    n_words = n1 * n2
    n_x = 2 ** n
    if n_words * n_x > EXACT_SCAN_GUARD:
        raise GuardError(
            f"exact analysis would scan {n_words * n_x:.3e} word/sequence cells; lower n")
    if cb.first_index is None:
        raise InternalInvariantError("exact-path codebook lost its value index")

    xs = np.array(list(itertools.product(range(2), repeat=n)), dtype=np.int8)
    flat = cb.words.reshape(n_words, n)

    # global value classes: codebook values in first-occurrence order; the
    # reserved word is the last class
    class_of: dict[bytes, int] = {}
    word_cls = np.empty(n_words, dtype=np.int64)
    for w in range(n_words):
        key = flat[w].tobytes()
        if key not in class_of:
            class_of[key] = len(class_of)
        word_cls[w] = class_of[key]
    u0_cls = len(class_of)
    n_cls = u0_cls + 1

    eps = cfg.eps_typ

    def typical_matrix(ref: np.ndarray) -> np.ndarray:
        """bool (n_words, n_x): word w jointly typical with sequence s."""
        u_card = ref.shape[0] - 1
        out = np.ones((n_words, n_x), dtype=bool)
        for a in range(u_card):
            for b in range(2):
                cnt = ((flat == a)[:, None, :] & (xs == b)[None, :, :]).sum(axis=2)
                out &= np.abs(cnt - n * ref[a, b]) <= eps * n * ref[a, b]
        return out

    t_ux = typical_matrix(cb.pair_ux)
    any_hit = t_ux.any(axis=0)
    first_w = np.where(any_hit, np.argmax(t_ux, axis=0), -1)
    k_cls = np.where(any_hit, word_cls[np.clip(first_w, 0, None)], u0_cls)
    i_star = np.where(any_hit, first_w // n2 + 1, n1 + 1)

    t_uy = typical_matrix(cb.pair_uy)
    # decoded class per (row, y): unique typical distinct value or fallback
    l_tab = np.full((n1 + 1, n_x), u0_cls, dtype=np.int64)
    onehot = np.zeros((n2, n_cls))
    for r in range(n1):
        rows_cls = word_cls[r * n2:(r + 1) * n2]
        onehot[:] = 0.0
        onehot[np.arange(n2), rows_cls] = 1.0
        sums = t_uy[r * n2:(r + 1) * n2].T @ onehot  # (n_x, n_cls)
        present = sums > 0.0
        n_distinct = present.sum(axis=1)
        lone = n_distinct == 1
        l_tab[r, lone] = np.argmax(present[lone], axis=1)

    p_joint = _kron_power(cfg.source.probs, n)  # (n_x, n_x), x rows
    p_x = p_joint.sum(axis=1)
    p_y = p_joint.sum(axis=0)

    theta = cfg.theta
    l_at_star = l_tab[i_star - 1]                      # (n_x_x, n_x_y)
    eq_star = (l_at_star == k_cls[:, None]).astype(float)
    cnt_all = np.zeros((n_cls, n_x))
    np.add.at(cnt_all, (l_tab.ravel(),
                        np.tile(np.arange(n_x), n1 + 1)), 1.0)
    eq_elsewhere = cnt_all[k_cls, :] - eq_star
    p_agree_xy = (1.0 - theta) * eq_star + (theta / float(n1)) * eq_elsewhere
    p_disagree = min(max(float(1.0 - (p_joint * p_agree_xy).sum()), 0.0), 1.0)

    p_k = np.zeros(n_cls)
    np.add.at(p_k, k_cls, p_x)
    joint_ky = np.zeros((n_cls, n_x))
    np.add.at(joint_ky, k_cls, p_joint)
    h_k = entropy_bits(p_k)
    h_ky = entropy_bits(joint_ky.ravel())
    h_y = entropy_bits(p_y)
    h_k_given_y = max(h_ky - h_y, 0.0)

    p_l = np.zeros(n_cls)
    w_star = p_joint * (1.0 - theta)
    np.add.at(p_l, l_at_star.ravel(), w_star.ravel())
    w_other = (p_joint.sum(axis=0) * (theta / float(n1)))
    p_l += cnt_all @ w_other
    star_mass = np.zeros(n_cls)
    np.add.at(star_mass, l_at_star.ravel(),
              (p_joint * (theta / float(n1))).ravel())
    p_l -= star_mass
    if abs(p_l.sum() - 1.0) > 1e-9:
        raise InternalInvariantError(f"output law sums to {p_l.sum()}")
    h_l = entropy_bits(np.clip(p_l, 0.0, None))

    log2_card = math.log2(cfg.k_cardinality)
    return ExactResult(
        p_disagree=p_disagree,
        entropy_k_bits=h_k,
        entropy_k_given_y_bits=h_k_given_y,
        entropy_l_bits=h_l,
        uniformity_gap_bits=abs(h_k / n - log2_card / n),
        k_cardinality=cfg.k_cardinality,
        log2_k_cardinality=log2_card,
        claim_rate_bits=h_k_given_y / n,
        n=n,
        n1=n1,
        n2=n2,
        theta=theta,
        seed=cfg.seed,
        joint_ky=joint_ky if include_joint else None,
    )


@dataclass(frozen=True)
class AchievabilityParams:
    """Targets for the four operating conditions of a common-randomness
    pair: error bound alpha, cardinality exponent c, uniformity slack
    beta, rate slack delta against the target rate, and an optional
    epsilon for the two-terminal entropy comparison."""

    alpha: float
    c: float
    beta: float
    delta: float
    h_target: float
    epsilon: float | None = None

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0 and self.delta > 0.0):
            raise ValidationError("alpha, beta, delta must all be > 0")
        if self.c < 0.0:
            raise ValidationError(f"cardinality exponent must be >= 0, got {self.c}")


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    holds: bool
    margin: float


@dataclass(frozen=True)
class AchievabilityReport:
    conditions: tuple
    remark: ConditionCheck | None
    theta_pairing_ok: bool

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.conditions)


def check_achievability_conditions(result, params: AchievabilityParams) -> AchievabilityReport:
    """Evaluate the four operating conditions plus the entropy remark.

    Works on both exact and Monte Carlo results; the remark comparison
    appears only when the result carries the second terminal's entropy.
    """
    n = result.n
    rate_k = result.entropy_k_bits / n
    log_card = result.log2_k_cardinality
    checks = (
        ConditionCheck("error", result.p_disagree <= params.alpha,
                       params.alpha - result.p_disagree),
        ConditionCheck("cardinality", log_card <= params.c * n,
                       params.c * n - log_card),
        ConditionCheck("uniformity", result.uniformity_gap_bits <= params.beta,
                       params.beta - result.uniformity_gap_bits),
        ConditionCheck("rate", rate_k > params.h_target - params.delta,
                       rate_k - (params.h_target - params.delta)),
    )
    remark = None
    h_l = getattr(result, "entropy_l_bits", None)
    if h_l is not None and params.epsilon is not None:
        gap = abs(rate_k - h_l / n)
        remark = ConditionCheck("entropy_match", gap <= params.epsilon,
                                params.epsilon - gap)
    return AchievabilityReport(checks, remark, result.theta <= params.alpha / 2.0)


@dataclass(frozen=True)
class RateCheck:
    ok: bool
    index_rate_bits: float
    capacity_bits: float
    mu_prime: float

    @property
    def margin(self) -> float:
        return self.capacity_bits - self.mu_prime - self.index_rate_bits


def rate_feasibility(cfg: ProtocolConfig, kernel, mu_prime: float,
                     tol: float = 1e-9) -> RateCheck:
    """Check log2(N1 + 1)/n against the index channel's capacity margin."""
    from .channelcap import dmc_capacity
    if mu_prime < 0.0:
        raise ValidationError(f"mu_prime must be >= 0, got {mu_prime}")
    cap = dmc_capacity(kernel, tol=tol)
    rate = math.log2(cfg.n1 + 1) / cfg.n
    return RateCheck(rate <= cap.value_bits - mu_prime + 1e-12, rate,
                     cap.value_bits, mu_prime)
