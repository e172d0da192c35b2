"""Channel kernels, capacity, and information-spectrum estimation.

Two block kernels are provided: a memoryless product channel and a mixture
of kernels in which one branch is drawn per block (a simple non-ergodic
channel). Capacity of a DMC comes from alternating maximization with a
certified upper/lower bracket. The spectral side draws per-block
information densities under an i.i.d. input and estimates the left edge of
the limiting spectrum, which is the rate the mixture channel supports.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DimensionError,
    GuardError,
    InternalInvariantError,
    UndefinedDensityError,
    ValidationError,
)
from .probspace import ConditionalPmf, Pmf, as_rng, subseed

_LN2 = math.log(2.0)
_SPECTRUM_KEY = 11


class ChannelKernel(ABC):
    """A block channel: sample outputs and score block likelihoods."""

    n_in: int
    n_out: int

    @abstractmethod
    def sample_output(self, t: np.ndarray, seed) -> np.ndarray:
        """Draw z^n given the input block t^n."""

    @abstractmethod
    def log2_likelihood(self, t: np.ndarray, z: np.ndarray) -> float:
        """log2 P(z^n | t^n); -inf when the block is impossible."""

    @abstractmethod
    def log2_output_prob(self, input_pmf: Pmf, z: np.ndarray) -> float:
        """log2 P(z^n) under an i.i.d. input with the given single-letter pmf."""

    def block_likelihood(self, t: np.ndarray, z: np.ndarray) -> float:
        ll = self.log2_likelihood(t, z)
        return 0.0 if ll == -np.inf else float(2.0 ** ll)


def _check_block(seq: np.ndarray, alphabet: int, what: str) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim != 1 or seq.size == 0:
        raise DimensionError(f"{what} block must be a nonempty 1-D array")
    if seq.min() < 0 or seq.max() >= alphabet:
        raise ValidationError(f"{what} block has symbols outside 0..{alphabet - 1}")
    return seq


@dataclass(frozen=True)
class DmcProduct(ChannelKernel):
    """Memoryless channel used independently on every letter of the block."""

    kernel: ConditionalPmf

    @property
    def n_in(self) -> int:
        return self.kernel.n_in

    @property
    def n_out(self) -> int:
        return self.kernel.n_out

    def sample_output(self, t: np.ndarray, seed) -> np.ndarray:
        t = _check_block(t, self.n_in, "input")
        rng = as_rng(seed)
        cum = np.cumsum(self.kernel.rows, axis=1)
        cum[:, -1] = 1.0
        u = rng.random(t.size)
        return (u[:, None] > cum[t]).sum(axis=1).astype(np.int64)

    def log2_likelihood(self, t: np.ndarray, z: np.ndarray) -> float:
        t = _check_block(t, self.n_in, "input")
        z = _check_block(z, self.n_out, "output")
        if t.size != z.size:
            raise DimensionError("input and output blocks differ in length")
        probs = self.kernel.rows[t, z]
        if np.any(probs == 0.0):
            return -np.inf
        return float(np.sum(np.log2(probs)))

    def log2_output_prob(self, input_pmf: Pmf, z: np.ndarray) -> float:
        if input_pmf.size != self.n_in:
            raise DimensionError("input pmf does not match the channel input alphabet")
        z = _check_block(z, self.n_out, "output")
        qz = input_pmf.probs @ self.kernel.rows
        probs = qz[z]
        if np.any(probs == 0.0):
            return -np.inf
        return float(np.sum(np.log2(probs)))


@dataclass(frozen=True)
class MixedChannel(ChannelKernel):
    """Mixture of kernels; a single branch is drawn once per block.

    The block likelihood and output law are the weight-averaged branch laws,
    so the information density sees the mixture even though each sampled
    block physically went through one branch.
    """

    components: tuple[tuple[float, ChannelKernel], ...]

    def __post_init__(self):
        if not self.components:
            raise ValidationError("MixedChannel needs at least one component")
        weights = np.array([w for w, _ in self.components], dtype=float)
        Pmf(weights)  # weights must form a pmf
        kernels = [k for _, k in self.components]
        if len({(k.n_in, k.n_out) for k in kernels}) != 1:
            raise DimensionError("MixedChannel components must share alphabets")
        object.__setattr__(
            self, "components", tuple((float(w), k) for w, k in self.components))

    @property
    def n_in(self) -> int:
        return self.components[0][1].n_in

    @property
    def n_out(self) -> int:
        return self.components[0][1].n_out

    def sample_output(self, t: np.ndarray, seed) -> np.ndarray:
        rng = as_rng(seed)
        weights = np.array([w for w, _ in self.components])
        branch = int(rng.choice(len(self.components), p=weights / weights.sum()))
        return self.components[branch][1].sample_output(t, rng)

    def log2_likelihood(self, t: np.ndarray, z: np.ndarray) -> float:
        terms = []
        for w, k in self.components:
            if w == 0.0:
                continue
            ll = k.log2_likelihood(t, z)
            if ll > -np.inf:
                terms.append(math.log(w) + ll * _LN2)
        if not terms:
            return -np.inf
        return float(logsumexp(terms) / _LN2)

    def log2_output_prob(self, input_pmf: Pmf, z: np.ndarray) -> float:
        terms = []
        for w, k in self.components:
            if w == 0.0:
                continue
            lp = k.log2_output_prob(input_pmf, z)
            if lp > -np.inf:
                terms.append(math.log(w) + lp * _LN2)
        if not terms:
            return -np.inf
        return float(logsumexp(terms) / _LN2)


@dataclass(frozen=True)
class CapacityResult:
    """Capacity value with a certified bracket and the achieving input."""

    value_bits: float
    input_pmf: Pmf
    lower_bits: float
    upper_bits: float
    iterations: int


def dmc_capacity(kernel: ConditionalPmf, tol: float = 1e-9,
                 max_iter: int = 200_000) -> CapacityResult:
    """Capacity of a DMC in bits by alternating maximization.

    Iterates the standard input-scaling update and stops once the classical
    bracket max_x D(W_x || q) - I(r; W) falls below tol, so the returned
    value is within tol of the true capacity.
    """
    if tol <= 0.0:
        raise ValidationError(f"tol must be positive, got {tol}")
    w = kernel.rows
    n_in = kernel.n_in
    r = np.full(n_in, 1.0 / n_in)
    log2w = np.where(w > 0.0, np.log2(np.where(w > 0.0, w, 1.0)), 0.0)
    lower = upper = 0.0
    for it in range(1, max_iter + 1):
        q = r @ w
        with np.errstate(divide="ignore"):
            log2q = np.where(q > 0.0, np.log2(np.where(q > 0.0, q, 1.0)), 0.0)
        # D(W(.|x) || q) per input; cells with w=0 contribute nothing
        d = np.sum(np.where(w > 0.0, w * (log2w - log2q[None, :]), 0.0), axis=1)
        lower = float(np.dot(r, d))
        upper = float(np.max(d))
        if upper - lower <= tol:
            value = 0.5 * (lower + upper)
            return CapacityResult(max(value, 0.0), Pmf(r), lower, upper, it)
        r = r * np.exp2(d - np.max(d))
        r = r / r.sum()
    raise GuardError(
        f"capacity iteration did not reach bracket {tol} in {max_iter} steps "
        f"(current bracket {upper - lower:.3e})")


@dataclass(frozen=True)
class InfoDensitySample:
    """One normalized block information density observation."""

    value_bits: float
    n: int


def information_density(kernel: ChannelKernel, input_pmf: Pmf,
                        t: np.ndarray, z: np.ndarray) -> float:
    """(1/n) log2 [ P(z^n|t^n) / P(z^n) ] in bits per symbol."""
    t = _check_block(t, kernel.n_in, "input")
    z = _check_block(z, kernel.n_out, "output")
    if t.size != z.size:
        raise DimensionError("input and output blocks differ in length")
    ll = kernel.log2_likelihood(t, z)
    lo = kernel.log2_output_prob(input_pmf, z)
    if ll == -np.inf or lo == -np.inf:
        raise UndefinedDensityError("zero likelihood or output mass at this block")
    return (ll - lo) / t.size


@dataclass(frozen=True)
class SpectrumEstimate:
    """Sorted sample of normalized information densities at one block length."""

    values_bits: np.ndarray
    n: int

    def __post_init__(self):
        arr = np.sort(np.asarray(self.values_bits, dtype=float))
        if arr.size == 0:
            raise ValidationError("SpectrumEstimate needs at least one sample")
        object.__setattr__(self, "values_bits", arr)

    @property
    def num_samples(self) -> int:
        return int(self.values_bits.size)

    def quantile(self, q: float) -> float:
        if not (0.0 <= q <= 1.0):
            raise ValidationError(f"quantile level must be in [0, 1], got {q}")
        idx = min(max(int(math.ceil(q * self.num_samples)) - 1, 0), self.num_samples - 1)
        return float(self.values_bits[idx])

    def mass_below(self, r: float) -> float:
        """Empirical P[density <= r]; right-continuous in r."""
        return float(np.searchsorted(self.values_bits, r, side="right") / self.num_samples)

    def mean(self) -> float:
        return float(self.values_bits.mean())

    def std(self) -> float:
        return float(self.values_bits.std(ddof=1)) if self.num_samples > 1 else 0.0


def spectrum_samples(kernel: ChannelKernel, input_pmf: Pmf, n: int,
                     num_samples: int, seed: int, threads: int = 1) -> SpectrumEstimate:
    """Monte Carlo spectrum of the normalized information density.

    Every sample owns a named sub-seed derived from (seed, n, index), so the
    result is identical for any batching or thread count.
    """
    if num_samples < 1:
        raise ValidationError("num_samples must be >= 1")
    if input_pmf.size != kernel.n_in:
        raise DimensionError("input pmf does not match the channel input alphabet")
    cum = np.cumsum(input_pmf.probs)
    cum[-1] = 1.0

    def one(idx: int) -> float:
        rng = np.random.default_rng(subseed(seed, _SPECTRUM_KEY, n, idx))
        t = np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)
        z = kernel.sample_output(t, rng)
        return information_density(kernel, input_pmf, t, z)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, range(num_samples)))
    else:
        values = [one(i) for i in range(num_samples)]
    return SpectrumEstimate(np.array(values), n)


@dataclass(frozen=True)
class SpectralRateEstimate:
    """Left-edge rate estimate with a monotone-evidence flag."""

    value_bits: float
    conclusive: bool
    drop_tol: float
    grid_step: float


def inf_info_rate_estimate(spectra: list[SpectrumEstimate], drop_tol: float = 0.01,
                           grid_step: float = 0.01) -> SpectralRateEstimate:
    """Estimate the largest rate whose left-tail spectrum mass dies out.

    Scans a rate grid and takes the largest R whose mass_below at the largest
    block length is <= drop_tol. The estimate is conclusive when that mass is
    also non-increasing across the provided block lengths; otherwise it is
    returned flagged.
    """
    if len(spectra) < 2:
        raise ValidationError("need spectra at two or more block lengths")
    ns = [s.n for s in spectra]
    if sorted(ns) != ns or len(set(ns)) != len(ns):
        raise ValidationError("spectra must come at strictly increasing block lengths")
    lo = min(float(s.values_bits[0]) for s in spectra)
    hi = max(float(s.values_bits[-1]) for s in spectra)
    k_lo = int(math.floor(lo / grid_step)) - 1
    k_hi = int(math.ceil(hi / grid_step)) + 1
    best = None
    for k in range(k_hi, k_lo - 1, -1):
        r = k * grid_step
        if spectra[-1].mass_below(r) <= drop_tol:
            best = r
            break
    if best is None:
        raise InternalInvariantError("grid failed to cover the sample range")
    masses = [s.mass_below(best) for s in spectra]
    monotone = all(b <= a + 1e-12 for a, b in zip(masses, masses[1:]))
    return SpectralRateEstimate(best, monotone, drop_tol, grid_step)


def bsc(p: float) -> ConditionalPmf:
    """Binary symmetric channel with crossover probability p."""
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"crossover must be in [0, 1], got {p}")
    return ConditionalPmf(np.array([[1.0 - p, p], [p, 1.0 - p]]))


def bec(e: float) -> ConditionalPmf:
    """Binary erasure channel; output symbol 2 is the erasure."""
    if not (0.0 <= e <= 1.0):
        raise ValidationError(f"erasure probability must be in [0, 1], got {e}")
    return ConditionalPmf(np.array([[1.0 - e, 0.0, e], [0.0, 1.0 - e, e]]))
