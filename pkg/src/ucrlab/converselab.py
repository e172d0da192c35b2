"""Quantitative machinery behind the outer bound.

Three groups of tools, all exact arithmetic on explicit pmfs (no sampling):

* derived slack constants: mu_beta from the uniformity gap and cardinality
  exponent, gamma_ab from mu_beta and the error bound, kappa_ab as the
  residual mass guaranteed after intersecting the three good events;
* concentration checks for the normalized self-information of K: an exact
  variance computation against the mu_beta budget, and the one-sided
  level-set probabilities with their Chebyshev/Markov floors;
* the telescoping decomposition that converts a blockwise mutual-information
  difference into n times a single-coordinate difference, verified exactly
  on small joint laws.

The floors and the variance budget are asymptotic claims; at desk-scale n
the preconditions may fail, so every checker reports margins and flags
applicability instead of asserting. The two exact identities (the interval
chain and the telescoping decomposition) are asserted.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InternalInvariantError, ValidationError
from .probspace import Pmf, as_rng, entropy_bits

__all__ = [
    "ConverseParams",
    "derive_params",
    "interval_lemma_check",
    "VarianceBoundReport",
    "variance_bound_check",
    "SetBoundReport",
    "set_bound_checks",
    "TelescopingInstance",
    "telescoping_identity_check",
    "spectrum_mass_margin",
]


@dataclass(frozen=True)
class ConverseParams:
    """Error/uniformity/cardinality constants and their derived slacks.

    alpha bounds P[K != L]; beta bounds the per-symbol uniformity gap;
    c bounds log2|K|/n. The derived values follow the defining formulas:

        mu_beta  = beta + 2*beta*c + beta^2
        gamma_ab = 2*sqrt(sqrt(mu_beta) / (1 - sqrt(alpha)))
        kappa_ab = alpha + 1 - (1 - 4*mu_beta/gamma_ab^2)^2

    epsilon is a user-supplied spectrum slack carried along for reporting;
    nothing here computes with it. gamma_ab and kappa_ab are NaN when
    alpha >= 1 (the defining expressions have no real value there).
    """

    alpha: float
    beta: float
    c: float
    epsilon: float | None = None
    mu_beta: float = field(init=False)
    gamma_ab: float = field(init=False)
    kappa_ab: float = field(init=False)

    def __post_init__(self):
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValidationError(f"alpha must be positive, got {self.alpha}")
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if not (self.c >= 0.0 and math.isfinite(self.c)):
            raise ValidationError(f"c must be nonnegative, got {self.c}")
        if self.epsilon is not None and not (self.epsilon > 0.0):
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        mu = self.beta + 2.0 * self.beta * self.c + self.beta * self.beta
        if self.alpha < 1.0:
            gamma = 2.0 * math.sqrt(math.sqrt(mu) / (1.0 - math.sqrt(self.alpha)))
            kappa = self.alpha + 1.0 - (1.0 - 4.0 * mu / gamma**2) ** 2
        else:
            gamma = math.nan
            kappa = math.nan
        object.__setattr__(self, "mu_beta", mu)
        object.__setattr__(self, "gamma_ab", gamma)
        object.__setattr__(self, "kappa_ab", kappa)

    @property
    def alpha_in_range(self) -> bool:
        return 0.0 < self.alpha < 1.0

    @property
    def kappa_in_range(self) -> bool:
        return 0.0 < self.kappa_ab < 0.5

    @property
    def mu_in_range(self) -> bool:
        return 0.0 < self.mu_beta < 1.0

    @property
    def constraints_hold(self) -> bool:
        return self.alpha_in_range and self.kappa_in_range and self.mu_in_range

    @property
    def chebyshev_ratio(self) -> float:
        """4*mu/gamma^2; algebraically sqrt(mu_beta)*(1 - sqrt(alpha))."""
        return 4.0 * self.mu_beta / self.gamma_ab**2


def derive_params(alpha: float, beta: float, c: float,
                  epsilon: float | None = None) -> ConverseParams:
    """Compute the derived slack constants; range violations are flags."""
    return ConverseParams(alpha=alpha, beta=beta, c=c, epsilon=epsilon)


def interval_lemma_check(p: ConverseParams) -> bool:
    """True iff 0 < 4*mu/gamma^2 < 1 - sqrt(alpha) < 1 numerically.

    Holds for every parameter point with alpha in (0,1) and mu_beta in
    (0,1): the ratio collapses to sqrt(mu_beta)*(1 - sqrt(alpha)).
    """
    if not math.isfinite(p.gamma_ab):
        return False
    ratio = p.chebyshev_ratio
    ceiling = 1.0 - math.sqrt(p.alpha)
    return 0.0 < ratio < ceiling < 1.0


@dataclass(frozen=True)
class VarianceBoundReport:
    """Exact var[(1/n) log2 1/P_K(K)] against the mu_beta budget.

    holds is None when a precondition fails: the budget is only claimed
    under the cardinality and uniformity conditions with at least three
    support points, and only for large n, so no boolean verdict is
    offered outside that region. The margin is rhs - lhs (positive when
    the budget is met).
    """

    lhs: float
    rhs: float
    holds: bool | None
    applicable: bool
    support_size: int
    cardinality_ok: bool
    uniformity_ok: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _self_information_stats(probs: np.ndarray, n: int) -> tuple[float, float]:
    """(mean, variance) of (1/n) log2(1/p) under p, over the support."""
    pos = probs[probs > 0.0]
    z = -np.log2(pos) / float(n)
    mean = float(np.sum(pos * z))
    var = float(np.sum(pos * z * z) - mean * mean)
    return mean, max(var, 0.0)


def variance_bound_check(k_pmf: Pmf | np.ndarray, n: int, beta: float,
                         c: float) -> VarianceBoundReport:
    """Exact self-information variance of K versus mu_beta.

    The cardinality condition log2|K| <= c*n and the uniformity condition
    |H(K)/n - log2|K|/n| <= beta are evaluated on the pmf's full alphabet
    and reported; the verdict is offered only when both hold and the
    support has at least three points.
    """
    if not isinstance(k_pmf, Pmf):
        k_pmf = Pmf(np.asarray(k_pmf, dtype=float))
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    mu = beta + 2.0 * beta * c + beta * beta
    _, var = _self_information_stats(k_pmf.probs, n)
    log_card = math.log2(k_pmf.size)
    h_k = entropy_bits(k_pmf.probs)
    support = k_pmf.support_size()
    card_ok = log_card <= c * n + 1e-12
    unif_ok = abs(h_k / n - log_card / n) <= beta + 1e-12
    applicable = support >= 3 and card_ok and unif_ok
    return VarianceBoundReport(
        lhs=var,
        rhs=mu,
        holds=(var <= mu) if applicable else None,
        applicable=applicable,
        support_size=support,
        cardinality_ok=card_ok,
        uniformity_ok=unif_ok,
    )


@dataclass(frozen=True)
class SetBoundReport:
    """One-sided self-information level sets and their probability floors.

    The first set keeps the values of K whose normalized self-information
    is no more than gamma/2 below H(K)/n; its mass is floored by
    1 - 4*mu/gamma^2 (Chebyshev). The second keeps the pairs (k, y-block)
    whose normalized conditional self-information is no more than gamma
    below H(K|Y-block)/n; its mass is floored by the square of the same
    quantity (Markov on top of the first floor). Floors are asymptotic;
    holds-verdicts are offered only when the preconditions certify.
    """

    p_in_l: float
    l_lower_bound: float
    p_in_d: float
    d_lower_bound: float
    l_holds: bool | None
    d_holds: bool | None
    applicable: bool
    support_size: int
    cardinality_ok: bool
    uniformity_ok: bool
    entropy_k_bits: float
    entropy_k_given_y_bits: float


def set_bound_checks(joint_ky: np.ndarray, n: int, params: ConverseParams,
                     log2_k_cardinality: float | None = None) -> SetBoundReport:
    """Exact level-set masses for an explicit (K, Y-block) joint law.

    joint_ky[k, y] is the joint probability of value k and y-block y.
    log2_k_cardinality overrides the alphabet size used in the
    cardinality/uniformity preconditions (the row count understates the
    nominal label space when unused labels were dropped).
    """
    joint = np.asarray(joint_ky, dtype=float)
    if joint.ndim != 2:
        raise DimensionError(f"joint_ky needs a 2-D array, got shape {joint.shape}")
    if np.any(joint < 0.0) or abs(joint.sum() - 1.0) > 1e-9:
        raise ValidationError("joint_ky must be a probability matrix summing to 1")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")

    gamma = params.gamma_ab
    if not math.isfinite(gamma):
        raise ValidationError("params have no real gamma_ab (alpha >= 1)")
    ratio = params.chebyshev_ratio
    l_bound = 1.0 - ratio
    d_bound = l_bound * l_bound

    p_k = joint.sum(axis=1)
    p_y = joint.sum(axis=0)
    h_k = entropy_bits(p_k)
    h_ky = entropy_bits(joint)
    h_y = entropy_bits(p_y)
    h_k_given_y = max(h_ky - h_y, 0.0)

    # members of the first set: p_k(k) <= 2^{n*gamma/2 - H(K)}
    sup = p_k > 0.0
    in_l = np.zeros_like(sup)
    in_l[sup] = -np.log2(p_k[sup]) / n >= h_k / n - gamma / 2.0 - 1e-12
    p_in_l = float(p_k[in_l].sum())

    # members of the second: p_{k|y} <= 2^{n*gamma - H(K|Y)}
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(p_y[None, :] > 0.0, joint / p_y[None, :], 0.0)
    mask = joint > 0.0
    in_d = np.zeros_like(mask)
    in_d[mask] = -np.log2(cond[mask]) / n >= h_k_given_y / n - gamma - 1e-12
    p_in_d = float(joint[in_d].sum())

    log_card = math.log2(joint.shape[0]) if log2_k_cardinality is None \
        else float(log2_k_cardinality)
    support = int(np.count_nonzero(sup))
    card_ok = log_card <= params.c * n + 1e-12
    unif_ok = abs(h_k / n - log_card / n) <= params.beta + 1e-12
    applicable = (support >= 3 and card_ok and unif_ok
                  and params.constraints_hold)
    return SetBoundReport(
        p_in_l=p_in_l,
        l_lower_bound=l_bound,
        p_in_d=p_in_d,
        d_lower_bound=d_bound,
        l_holds=(p_in_l >= l_bound - 1e-12) if applicable else None,
        d_holds=(p_in_d >= d_bound - 1e-12) if applicable else None,
        applicable=applicable,
        support_size=support,
        cardinality_ok=card_ok,
        uniformity_ok=unif_ok,
        entropy_k_bits=h_k,
        entropy_k_given_y_bits=h_k_given_y,
    )


_TELESCOPE_CELL_GUARD = 4 * 10**6


@dataclass(frozen=True)
class TelescopingInstance:
    """Explicit joint law of (S, R, X-block, Y-block) on tiny alphabets.

    joint has shape (s_card, r_card) + (x_card,)*n + (y_card,)*n. Kept
    small (n <= 4, per-coordinate alphabets <= 3) because the identity
    check enumerates the full state space.
    """

    joint: np.ndarray
    n: int

    def __post_init__(self):
        arr = np.asarray(self.joint, dtype=float)
        if not (1 <= self.n <= 4):
            raise ValidationError(f"n must be in 1..4, got {self.n}")
        if arr.ndim != 2 + 2 * self.n:
            raise DimensionError(
                f"joint needs {2 + 2 * self.n} axes for n={self.n}, got {arr.ndim}")
        if any(d > 3 for d in arr.shape[2:]):
            raise ValidationError("per-coordinate alphabets are capped at 3")
        if arr.size > _TELESCOPE_CELL_GUARD:
            raise ValidationError(f"instance has {arr.size} cells; too large")
        if np.any(arr < 0.0) or abs(arr.sum() - 1.0) > 1e-9:
            raise ValidationError("joint must be a probability array summing to 1")
        if len(set(arr.shape[2:2 + self.n])) != 1 or len(set(arr.shape[2 + self.n:])) != 1:
            raise DimensionError("all X axes (and all Y axes) must share one size")
        object.__setattr__(self, "joint", arr)

    @property
    def s_card(self) -> int:
        return self.joint.shape[0]

    @property
    def r_card(self) -> int:
        return self.joint.shape[1]

    @property
    def x_card(self) -> int:
        return self.joint.shape[2]

    @property
    def y_card(self) -> int:
        return self.joint.shape[2 + self.n]

    @staticmethod
    def random(seed, n: int, s_card: int = 2, r_card: int = 2,
               x_card: int = 2, y_card: int = 2,
               concentration: float = 1.0) -> "TelescopingInstance":
        """Dirichlet-random instance; handy for property sweeps."""
        rng = as_rng(seed)
        shape = (s_card, r_card) + (x_card,) * n + (y_card,) * n
        cells = int(np.prod(shape))
        probs = rng.dirichlet(np.full(cells, concentration)).reshape(shape)
        return TelescopingInstance(joint=probs, n=n)


def _cmi(p_abc: np.ndarray) -> float:
    """I(A;B|C) of a 3-axis probability array."""
    h_ac = entropy_bits(p_abc.sum(axis=1))
    h_bc = entropy_bits(p_abc.sum(axis=0))
    h_abc = entropy_bits(p_abc)
    h_c = entropy_bits(p_abc.sum(axis=(0, 1)))
    return h_ac + h_bc - h_abc - h_c


def telescoping_identity_check(inst: TelescopingInstance,
                               tol: float = 1e-10) -> tuple[float, float, float]:
    """Both sides of the blockwise-to-single-coordinate identity.

    Left side: I(S;X-block|R) - I(S;Y-block|R) computed on the explicit
    joint. Right side: n*[I(S;X_J|V) - I(S;Y_J|V)] with J uniform on the
    coordinates, independent of everything, and V the tuple (X-prefix
    before J, Y-suffix after J, R, J). Returns (lhs, rhs, gap) and raises
    when the gap exceeds tol: equality is an identity, so a violation
    means broken arithmetic, not an unlucky instance.
    """
    n = inst.n
    joint = inst.joint
    s_card, r_card = inst.s_card, inst.r_card

    p_sxr = joint.sum(axis=tuple(range(2 + n, 2 + 2 * n)))      # (S, R, X-block)
    p_syr = joint.sum(axis=tuple(range(2, 2 + n)))              # (S, R, Y-block)
    lhs = (_cmi(np.moveaxis(p_sxr.reshape(s_card, r_card, -1), 2, 1))
           - _cmi(np.moveaxis(p_syr.reshape(s_card, r_card, -1), 2, 1)))

    # right side: accumulate the (S, coordinate-symbol, V) laws with J
    # folded into V at weight 1/n
    x_side: dict[tuple, float] = defaultdict(float)
    y_side: dict[tuple, float] = defaultdict(float)
    flat = joint.ravel()
    shape = joint.shape
    for idx in np.ndindex(*shape):
        p = flat[np.ravel_multi_index(idx, shape)]
        if p == 0.0:
            continue
        s, r = idx[0], idx[1]
        xs = idx[2:2 + n]
        ys = idx[2 + n:]
        w = p / n
        for j in range(n):
            v = (xs[:j], ys[j + 1:], r, j)
            x_side[(s, xs[j], v)] += w
            y_side[(s, ys[j], v)] += w

    v_labels = {key[2] for key in x_side} | {key[2] for key in y_side}
    v_index = {v: i for i, v in enumerate(sorted(v_labels))}

    def to_array(side: dict[tuple, float], sym_card: int) -> np.ndarray:
        arr = np.zeros((s_card, sym_card, len(v_index)))
        for (s, sym, v), p in side.items():
            arr[s, sym, v_index[v]] += p
        return arr

    rhs = n * (_cmi(to_array(x_side, inst.x_card))
               - _cmi(to_array(y_side, inst.y_card)))
    gap = abs(lhs - rhs)
    if gap > tol:
        raise InternalInvariantError(
            f"telescoping identity violated: |{lhs} - {rhs}| = {gap:.3e}")
    return lhs, rhs, gap


def spectrum_mass_margin(params: ConverseParams, empirical_mass: float) -> float:
    """Margin of the spectrum condition 2*kappa_ab < P[density <= rate + eps].

    Positive means the empirical mass clears the requirement. Finite
    experiments cannot certify the infinitely-often form of the condition,
    so only the margin is reported, never a theorem-grade verdict.
    """
    if not (0.0 <= empirical_mass <= 1.0):
        raise ValidationError(f"empirical_mass must be in [0, 1], got {empirical_mass}")
    return empirical_mass - 2.0 * params.kappa_ab
