"""Finite probability primitives used everywhere else in the package.

Containers for single, pairwise, and triple-joint pmfs plus conditional
kernels; entropy and mutual information in bits; i.i.d. block sampling;
robust (relative-deviation) joint typicality; and exact-type sequence
sampling with largest-remainder count quantization.

Conventions: all logarithms are base 2, 0 * log 0 = 0, pmf entries are
validated nonnegative and summing to one within 1e-12.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, GuardError, InternalInvariantError, ValidationError

SUM_TOL = 1e-12


def as_rng(seed) -> np.random.Generator:
    """Coerce an int seed, a SeedSequence, or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (int, np.integer)):
        if seed < 0:
            raise ValidationError(f"seed must be nonnegative, got {seed}")
        return np.random.default_rng(np.random.SeedSequence(int(seed)))
    raise ValidationError(f"cannot build a generator from {type(seed).__name__}")


def subseed(seed: int, *key: int) -> np.random.SeedSequence:
    """Named child seed; identical for any execution schedule."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def _validate_prob_array(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.size == 0:
        raise ValidationError(f"{what}: empty probability array")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: non-finite entries")
    if np.any(arr < 0.0):
        raise ValidationError(f"{what}: negative entries (min {arr.min():.3e})")
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise ValidationError(f"{what}: entries sum to {total!r}, not 1 within {SUM_TOL}")
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on a finite alphabet indexed 0..size-1."""

    probs: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = _validate_prob_array(self.probs, "Pmf")
        if arr.ndim != 1:
            raise DimensionError(f"Pmf needs a 1-D array, got shape {arr.shape}")
        object.__setattr__(self, "probs", arr)
        if self.labels is not None and len(self.labels) != arr.size:
            raise DimensionError("Pmf: label count does not match alphabet size")

    @property
    def size(self) -> int:
        return int(self.probs.size)

    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs > 0.0))


@dataclass(frozen=True)
class JointPmf:
    """Joint pmf over an (X, Y) pair; probs[x, y], row-major in x."""

    probs: np.ndarray
    labels_x: tuple[str, ...] | None = None
    labels_y: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = _validate_prob_array(self.probs, "JointPmf")
        if arr.ndim != 2:
            raise DimensionError(f"JointPmf needs a 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "probs", arr)

    @property
    def nx(self) -> int:
        return int(self.probs.shape[0])

    @property
    def ny(self) -> int:
        return int(self.probs.shape[1])

    def marginal_x(self) -> Pmf:
        return Pmf(self.probs.sum(axis=1))

    def marginal_y(self) -> Pmf:
        return Pmf(self.probs.sum(axis=0))

    def swapped(self) -> "JointPmf":
        return JointPmf(self.probs.T.copy(), self.labels_y, self.labels_x)

    def cond_x_given_y(self) -> "ConditionalPmf":
        """Rows indexed by y; y values of zero mass get a uniform placeholder row."""
        py = self.probs.sum(axis=0)
        rows = np.empty((self.ny, self.nx))
        for y in range(self.ny):
            if py[y] > 0.0:
                rows[y] = self.probs[:, y] / py[y]
            else:
                rows[y] = 1.0 / self.nx
        return ConditionalPmf(rows)


@dataclass(frozen=True)
class ConditionalPmf:
    """Stochastic matrix: rows[i] is a pmf over the output alphabet."""

    rows: np.ndarray
    labels_in: tuple[str, ...] | None = None
    labels_out: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.rows, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(f"ConditionalPmf needs a 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise ValidationError("ConditionalPmf: rows must be finite and nonnegative")
        sums = arr.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValidationError(
                f"ConditionalPmf: row {bad} sums to {float(sums[bad])!r}, not 1 within {SUM_TOL}")
        object.__setattr__(self, "rows", arr)

    @property
    def n_in(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n_out(self) -> int:
        return int(self.rows.shape[1])

    def is_deterministic(self) -> bool:
        return bool(np.all(np.max(self.rows, axis=1) == 1.0))


@dataclass(frozen=True)
class TriplePmf:
    """Joint pmf over (U, X, Y); probs[u, x, y]."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _validate_prob_array(self.probs, "TriplePmf")
        if arr.ndim != 3:
            raise DimensionError(f"TriplePmf needs a 3-D array, got shape {arr.shape}")
        object.__setattr__(self, "probs", arr)

    def pair_ux(self) -> JointPmf:
        return JointPmf(self.probs.sum(axis=2))

    def pair_uy(self) -> JointPmf:
        return JointPmf(self.probs.sum(axis=1))

    def pair_xy(self) -> JointPmf:
        return JointPmf(self.probs.sum(axis=0))

    def marginal(self, axis: int) -> Pmf:
        keep = [a for a in range(3) if a != axis]
        return Pmf(self.probs.sum(axis=tuple(keep)))


@dataclass(frozen=True)
class TypicalityParams:
    """Relative-deviation tolerance for robust typicality."""

    eps_typ: float

    def __post_init__(self):
        if not (0.0 < self.eps_typ < 1.0):
            raise ValidationError(f"eps_typ must lie in (0, 1), got {self.eps_typ}")


def entropy_bits(probs: np.ndarray) -> float:
    """Shannon entropy in bits of a raw nonnegative array; 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float).ravel()
    pos = p[p > 0.0]
    return max(float(-np.sum(pos * np.log2(pos))), 0.0)


def entropy(p: Pmf | np.ndarray) -> float:
    """Entropy in bits of a validated pmf."""
    if not isinstance(p, Pmf):
        p = Pmf(np.asarray(p, dtype=float))
    return entropy_bits(p.probs)


def mutual_information(j: JointPmf) -> float:
    """I(X;Y) in bits, computed as H(X) + H(Y) - H(X,Y) and clamped at zero."""
    hx = entropy_bits(j.probs.sum(axis=1))
    hy = entropy_bits(j.probs.sum(axis=0))
    hxy = entropy_bits(j.probs)
    mi = hx + hy - hxy
    if mi < -1e-9:
        raise InternalInvariantError(f"mutual information {mi} below -1e-9")
    return max(mi, 0.0)


def conditional_entropy_x_given_y(j: JointPmf) -> float:
    """H(X|Y) in bits."""
    return entropy_bits(j.probs) - entropy_bits(j.probs.sum(axis=0))


def compose_aux(source: JointPmf, aux: ConditionalPmf) -> TriplePmf:
    """Attach an auxiliary variable U to X through a channel X -> U.

    Produces the triple joint P(u, x, y) = aux(u|x) * source(x, y), which by
    construction satisfies the chain U - X - Y (I(U;Y|X) = 0).
    """
    if aux.n_in != source.nx:
        raise DimensionError(
            f"aux has {aux.n_in} input symbols but the source X-alphabet is {source.nx}")
    probs = np.einsum("xu,xy->uxy", aux.rows, source.probs)
    return TriplePmf(probs)


def markov_defect(t: TriplePmf) -> float:
    """I(U;Y|X) in bits for a (U, X, Y) triple; zero when U - X - Y holds."""
    p = t.probs
    h_ux = entropy_bits(p.sum(axis=2))
    h_xy = entropy_bits(p.sum(axis=0))
    h_uxy = entropy_bits(p)
    h_x = entropy_bits(p.sum(axis=(0, 2)))
    return h_ux + h_xy - h_uxy - h_x


def sample_iid(j: JointPmf, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw n i.i.d. symbol pairs from a joint pmf; returns (x, y) int arrays."""
    if n < 1:
        raise ValidationError(f"block length must be >= 1, got {n}")
    rng = as_rng(seed)
    flat = j.probs.ravel()
    cum = np.cumsum(flat)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(n), side="right")
    x, y = np.divmod(idx, j.ny)
    return x.astype(np.int64), y.astype(np.int64)


def _ref_probs(ref) -> np.ndarray:
    if isinstance(ref, (Pmf, JointPmf, TriplePmf)):
        return ref.probs
    arr = np.asarray(ref, dtype=float)
    return _validate_prob_array(arr, "typicality reference")


def is_jointly_typical(seqs, ref, tp: TypicalityParams) -> bool:
    """Robust typicality of one or more aligned sequences against a reference pmf.

    For every cell a of the reference: |count(a)/n - P(a)| <= eps_typ * P(a).
    Cells with P(a) = 0 therefore force count(a) = 0.
    """
    if isinstance(seqs, np.ndarray) and seqs.ndim == 1:
        seqs = (seqs,)
    seqs = tuple(np.asarray(s, dtype=np.int64) for s in seqs)
    probs = _ref_probs(ref)
    if probs.ndim != len(seqs):
        raise DimensionError(
            f"reference has {probs.ndim} axes but {len(seqs)} sequences were given")
    n = seqs[0].size
    if n == 0 or any(s.size != n for s in seqs):
        raise DimensionError("sequences must be nonempty and of equal length")
    for axis, s in enumerate(seqs):
        if s.min() < 0 or s.max() >= probs.shape[axis]:
            raise ValidationError(f"sequence {axis} has symbols outside the reference alphabet")
    flat = np.ravel_multi_index(seqs, probs.shape)
    counts = np.bincount(flat, minlength=probs.size).astype(float)
    target = n * probs.ravel()
    return bool(np.all(np.abs(counts - target) <= tp.eps_typ * target))


def type_counts(p: Pmf | np.ndarray, n: int) -> np.ndarray:
    """Quantize n * p to integer counts: round to nearest, then fix the total
    by largest-remainder correction. Counts stay nonnegative and sum to n."""
    if not isinstance(p, Pmf):
        p = Pmf(np.asarray(p, dtype=float))
    if n < 1:
        raise ValidationError(f"type length must be >= 1, got {n}")
    if p.support_size() > n:
        raise GuardError(
            f"infeasible type: pmf has {p.support_size()} support points but n = {n}")
    exact = n * p.probs
    base = np.floor(exact + 0.5)
    remainder = exact - base
    deficit = int(round(n - base.sum()))
    if deficit > 0:
        order = np.argsort(-remainder, kind="stable")
        base[order[:deficit]] += 1
    elif deficit < 0:
        order = np.argsort(remainder, kind="stable")
        take = [i for i in order if base[i] >= 1][: -deficit]
        base[take] -= 1
    counts = base.astype(np.int64)
    if counts.sum() != n or np.any(counts < 0):
        raise InternalInvariantError("type quantization failed to produce valid counts")
    return counts


def sample_type_class(p: Pmf, n: int, seed) -> np.ndarray:
    """Uniform draw from the exact type class of the quantized type of p."""
    counts = type_counts(p, n)
    seq = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    rng = as_rng(seed)
    return rng.permutation(seq)
