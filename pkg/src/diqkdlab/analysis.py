"""Quantitative toolkit: optimal satisfaction values, classical bounds,
key-rate calculator, behavior-table checkers, information measures,
concentration bounds, and brute-force oracles.

Everything here is a pure function of its arguments; rational
arithmetic is used where exactness matters (the classical optimum).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from . import devices, qsim

SQRT2 = math.sqrt(2)


def compute_opt() -> float:
    """Maximum quantum probability of satisfying the per-round output
    condition under uniform inputs: (2/3) cos^2(pi/8) + 1/3."""
    return (2 / 3) * math.cos(math.pi / 8) ** 2 + 1 / 3


OPT = compute_opt()

# The per-round condition: the parity constraint a XOR b = x AND y for
# binary inputs, equality for (2,1), anything goes for (2,0).


def chsh_satisfied(x: int, y: int, a: int, b: int) -> bool:
    if x == 2:
        return a == b if y == 1 else True
    return (a ^ b) == (x & y)


def chsh_satisfied_array(x, y, a, b) -> np.ndarray:
    x = np.asarray(x)
    y = np.asarray(y)
    a = np.asarray(a)
    b = np.asarray(b)
    parity_ok = (a ^ b) == (x & y)
    equal_ok = a == b
    return np.where(x == 2, np.where(y == 1, equal_ok, True), parity_ok)


def enumerate_deterministic_strategies() -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All 2^3 * 2^2 = 32 deterministic response-function pairs."""
    for fa in itertools.product((0, 1), repeat=3):
        for fb in itertools.product((0, 1), repeat=2):
            yield fa, fb


def strategy_satisfaction(fa: Sequence[int], fb: Sequence[int]) -> Fraction:
    """Exact satisfaction rate of a deterministic pair under uniform inputs."""
    hits = sum(
        chsh_satisfied(x, y, fa[x], fb[y])
        for x in devices.ALICE_INPUTS
        for y in devices.BOB_INPUTS
    )
    return Fraction(hits, 6)


def classical_opt_bruteforce() -> Fraction:
    """Maximum satisfaction over all deterministic strategies: 5/6."""
    return max(strategy_satisfaction(fa, fb) for fa, fb in enumerate_deterministic_strategies())


def best_deterministic_strategy() -> tuple[tuple[int, ...], tuple[int, ...]]:
    return max(
        enumerate_deterministic_strategies(),
        key=lambda s: strategy_satisfaction(*s),
    )


# ---------------------------------------------------------------------------
# Behavior tables.

class BehaviorTable:
    """Conditional outcome probabilities p(a, b | x, y), stored as an
    array indexed [x][y][a][b] (the JSON layout)."""

    def __init__(self, p: np.ndarray, tol: float = 1e-9):
        p = np.asarray(p, dtype=float)
        if p.shape != (3, 2, 2, 2):
            raise ValueError(f"expected shape (3, 2, 2, 2), got {p.shape}")
        if p.min() < -tol:
            raise ValueError("negative probability entry")
        sums = p.sum(axis=(2, 3))
        if np.abs(sums - 1).max() > tol:
            raise ValueError("conditional distributions must each sum to 1")
        self.p = p

    def prob(self, a: int, b: int, x: int, y: int) -> float:
        return float(self.p[x, y, a, b])

    def marginal_a(self, x: int, y: int) -> np.ndarray:
        return self.p[x, y].sum(axis=1)

    def marginal_b(self, x: int, y: int) -> np.ndarray:
        return self.p[x, y].sum(axis=0)

    def to_json(self) -> str:
        return json.dumps({"p": self.p.tolist()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BehaviorTable":
        return cls(np.asarray(json.loads(text)["p"]))

    @classmethod
    def from_strategy(cls, fa: Sequence[int], fb: Sequence[int]) -> "BehaviorTable":
        p = np.zeros((3, 2, 2, 2))
        for x in devices.ALICE_INPUTS:
            for y in devices.BOB_INPUTS:
                p[x, y, fa[x], fb[y]] = 1.0
        return cls(p)

    @classmethod
    def honest(cls, noise: float, angles: devices.AngleTable = devices.CANONICAL_ANGLES) -> "BehaviorTable":
        state = qsim.apply_depolarizing(qsim.epr_pair(), noise)
        p = np.zeros((3, 2, 2, 2))
        for x in devices.ALICE_INPUTS:
            for y in devices.BOB_INPUTS:
                p[x, y] = qsim.outcome_distribution(state, angles.alice[x], angles.bob[y])
        return cls(p)


def table_satisfaction(table: BehaviorTable) -> float:
    """Expected satisfaction rate of the table under uniform inputs."""
    total = 0.0
    for x in devices.ALICE_INPUTS:
        for y in devices.BOB_INPUTS:
            for a in (0, 1):
                for b in (0, 1):
                    if chsh_satisfied(x, y, a, b):
                        total += table.p[x, y, a, b]
    return total / 6


def estimate_chsh(result, subset) -> tuple[float, float]:
    """Fraction of rounds in `subset` satisfying the condition, and the
    deficit eta' = opt - fraction (negative values preserved)."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("subset must be nonempty")
    sat = chsh_satisfied_array(
        np.asarray(result.x)[subset],
        np.asarray(result.y)[subset],
        np.asarray(result.a)[subset],
        np.asarray(result.b)[subset],
    )
    fraction = float(np.mean(sat))
    return fraction, OPT - fraction


# ---------------------------------------------------------------------------
# Key-rate calculator.

RECON_COST_CHOICES = ("h2eta", "h11eta", "empirical")
BASIS_CHOICES = ("C", "C_minus_B")


@dataclass(frozen=True)
class RateModel:
    """Free choices in the final key-length expression: how the
    reconciliation cost is charged, the constant on the log(1/eps)/m
    loss term, and whether lengths are counted against the check set or
    the check set minus the test set."""

    recon_cost: str = "h2eta"
    o_term_constant: float = 0.0
    basis: str = "C"
    empirical_cost: Optional[float] = None  # bits per basis bit, for recon_cost="empirical"

    def __post_init__(self):
        if self.recon_cost not in RECON_COST_CHOICES:
            raise ValueError(f"recon_cost must be one of {RECON_COST_CHOICES}")
        if self.basis not in BASIS_CHOICES:
            raise ValueError(f"basis must be one of {BASIS_CHOICES}")
        if self.o_term_constant < 0:
            raise ValueError("o_term_constant must be nonnegative")


def kappa_bound(eta: float) -> float:
    """Certified min-entropy rate per check bit at tolerated error rate
    eta: (sqrt(2)-1)/(4 ln 2) - (4/ln 2) eta, clamped at zero."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return max(0.0, (SQRT2 - 1) / (4 * math.log(2)) - (4 / math.log(2)) * eta)


def _binary_entropy(q: float) -> float:
    if q <= 0 or q >= 1:
        return 0.0
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


def recon_cost_rate(model: RateModel, eta: float) -> float:
    if model.recon_cost == "h2eta":
        return _binary_entropy(min(1.0, 2 * eta))
    if model.recon_cost == "h11eta":
        return _binary_entropy(min(1.0, 1.1 * eta))
    if model.empirical_cost is None:
        raise ValueError("empirical recon cost requested but not provided")
    return model.empirical_cost


def key_rate(
    eta: float,
    eps: float,
    m: int,
    model: RateModel = RateModel(),
    gamma: float = 0.0,
) -> tuple[float, float]:
    """Return (kappa_bound, final key length per protocol round).

    The final length charges the reconciliation cost and the
    o_term_constant * log2(1/eps) / m loss against kappa, then scales
    by the basis size per round (|C| ~ m/6, or |C - B| ~ (1-gamma) m/6).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    if m < 1:
        raise ValueError("m must be positive")
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must be in [0, 1]")
    kb = kappa_bound(eta)
    rate = max(0.0, kb - recon_cost_rate(model, eta) - model.o_term_constant * math.log2(1 / eps) / m)
    basis_per_round = 1 / 6 if model.basis == "C" else (1 - gamma) / 6
    return kb, rate * basis_per_round


def final_rate_zero_crossing(
    eps: float,
    m: int,
    model: RateModel,
    lo: float = 1e-6,
    hi: float = 0.03,
    iters: int = 80,
) -> float:
    """Largest eta with positive final rate, by bisection on [lo, hi]."""

    def f(eta: float) -> float:
        return key_rate(eta, eps, m, model)[1]

    if f(lo) <= 0 or f(hi) > 0:
        raise ValueError("zero crossing is not bracketed by [lo, hi]")
    for _ in range(iters):
        mid = (lo + hi) / 2
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# No-signalling and the guessing bound.

def no_signalling_deviation(table: BehaviorTable) -> float:
    """Largest total-variation shift of either party's marginal when the
    other party's input changes."""
    worst = 0.0
    for x in devices.ALICE_INPUTS:
        margs = [table.marginal_a(x, y) for y in devices.BOB_INPUTS]
        for m1, m2 in itertools.combinations(margs, 2):
            worst = max(worst, 0.5 * float(np.abs(m1 - m2).sum()))
    for y in devices.BOB_INPUTS:
        margs = [table.marginal_b(x, y) for x in devices.ALICE_INPUTS]
        for m1, m2 in itertools.combinations(margs, 2):
            worst = max(worst, 0.5 * float(np.abs(m1 - m2).sum()))
    return worst


def chsh_correlator(table: BehaviorTable) -> float:
    """(1/4)(<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>) from the table."""

    def corr(x: int, y: int) -> float:
        p = table.p[x, y]
        return float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])

    return 0.25 * (corr(0, 0) + corr(0, 1) + corr(1, 0) - corr(1, 1))


HOLDS = "HOLDS"
VIOLATED = "VIOLATED"
HYPOTHESIS_NOT_MET = "HYPOTHESIS_NOT_MET"


def guessing_bound_check(
    table: BehaviorTable,
    delta: Optional[float] = None,
    eta: Optional[float] = None,
    nu: Optional[float] = None,
    tol: float = 1e-9,
) -> str:
    """Check the tradeoff between a near-maximal correlator and the
    predictability of Bob's output on input pair (2, 1).

    Hypotheses: the correlator is at least sqrt(2)/2 - eta; the parties'
    states are nu-close to input-independent; Bob's most likely (2,1)
    outcome has probability at least 1 - delta. Any behavior meeting
    them must obey delta >= (sqrt(2)-1)/2 - eta - 75 nu; a table that
    meets the hypotheses yet breaks the conclusion is flagged VIOLATED
    (no real behavior can, so VIOLATED marks corrupted or hypothetical
    data).

    eta and delta are always checked against the table (both are
    directly measurable). State closeness is not observable from a
    behavior table: when nu is None it is estimated by the
    no-signalling deviation proxy; an explicitly passed nu is taken as
    the caller's claim.
    """
    corr = chsh_correlator(table)
    guess_prob = float(table.marginal_b(2, 1).max())

    if eta is None:
        eta = max(0.0, SQRT2 / 2 - corr)
    if nu is None:
        nu = no_signalling_deviation(table)
    if delta is None:
        delta = 1 - guess_prob

    if corr < SQRT2 / 2 - eta - tol:
        return HYPOTHESIS_NOT_MET
    if guess_prob < 1 - delta - tol:
        return HYPOTHESIS_NOT_MET
    if delta >= (SQRT2 - 1) / 2 - eta - 75 * nu - tol:
        return HOLDS
    return VIOLATED


# ---------------------------------------------------------------------------
# Classical information measures.

def _validate_joint(joint) -> np.ndarray:
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise ValueError("joint distribution must be a 2-D array")
    if p.min() < -1e-12 or abs(p.sum() - 1) > 1e-9:
        raise ValueError("joint distribution entries must be nonnegative and sum to 1")
    return np.clip(p, 0.0, None)


def min_entropy_classical(joint) -> float:
    """-log2 of the optimal probability of guessing the first variable
    given the second (rows: key, columns: side information)."""
    p = _validate_joint(joint)
    p_guess = float(p.max(axis=0).sum())
    return -math.log2(p_guess)


def mutual_information_classical(joint) -> float:
    """Shannon mutual information in bits."""
    p = _validate_joint(joint)
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    mask = p > 0
    ratio = np.ones_like(p)
    np.divide(p, pa @ pb, out=ratio, where=mask)
    return float((p[mask] * np.log2(ratio[mask])).sum())


def l1_product_gap(joint) -> float:
    """Schatten-1 distance between the joint and the product of its
    marginals (classical case: entrywise absolute sum)."""
    p = _validate_joint(joint)
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    return float(np.abs(p - pa @ pb).sum())


# ---------------------------------------------------------------------------
# Concentration bounds.

def azuma_tail(c, t: float) -> float:
    """Martingale tail bound exp(-t^2 / (2 sum c_k^2)) for increments
    bounded by the c_k."""
    c = np.asarray(c, dtype=float)
    if c.size == 0 or c.min() <= 0:
        raise ValueError("increment bounds must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(-t * t / (2 * float((c * c).sum())))


def chernoff_subset(beta: float, eta: float, gamma: float, m: int) -> float:
    """Bound on the probability that a random subset of size gamma*m of
    a run with violation rate (1 + beta) eta above baseline still looks
    eta-acceptable: exp(-2 beta^2 eta^2 gamma m)."""
    if not 0 <= beta <= 1:
        raise ValueError("beta must be in [0, 1]")
    if eta < 0 or gamma < 0 or m < 1:
        raise ValueError("eta, gamma must be nonnegative and m positive")
    return math.exp(-2 * beta**2 * eta**2 * gamma * m)


# ---------------------------------------------------------------------------
# Exhaustive witness oracle for low-error distributions.

FOUND = "FOUND"
FAILED = "FAILED"
NOT_APPLICABLE = "NOT_APPLICABLE"


@dataclass
class WitnessReport:
    status: str
    witness_mass: float = 0.0
    witness_size: int = 0
    detail: dict = field(default_factory=dict)


def conditional_error_witness(
    dist,
    eta: float,
    beta: float,
    delta: float,
    eps: float,
) -> WitnessReport:
    """Search for a set G of strings with Pr(G) >= eps/2 such that every
    x in G has, on at least a (1 - delta) fraction of indices i,
    Pr(X_i = 0 | X_{<i} = x_{<i}) >= 1 - eta - beta.

    Applicable when exp(-2 beta^2 delta m) < eps/2 and the distribution
    puts mass at least eps on strings of weight <= eta m. The witness is
    built exhaustively from the conditional probabilities; for
    applicable inputs a witness always exists, so FAILED indicates a
    defect in the caller's distribution (or this implementation).

    `dist` is a length-2^m probability vector; index bit order is
    big-endian (X_1 is the most significant bit), so prefixes are
    contiguous index ranges.
    """
    p = np.asarray(dist, dtype=float)
    size = p.size
    m = int(round(math.log2(size)))
    if 1 << m != size:
        raise ValueError("distribution length must be a power of 2")
    if m > 20:
        raise ValueError("exhaustive search is limited to m <= 20")
    if p.min() < -1e-12 or abs(p.sum() - 1) > 1e-9:
        raise ValueError("dist must be a probability vector")
    p = np.clip(p, 0.0, None)

    weights = np.zeros(size, dtype=np.int64)
    for bit in range(m):
        weights += (np.arange(size) >> bit) & 1
    low_mass = float(p[weights <= eta * m].sum())
    hyp_tail = math.exp(-2 * beta**2 * delta * m)
    if hyp_tail >= eps / 2 or low_mass < eps:
        return WitnessReport(NOT_APPLICABLE, detail={"tail": hyp_tail, "low_weight_mass": low_mass})

    bad_count = np.zeros(size, dtype=np.int64)
    for i in range(m):
        prefix = p.reshape(1 << i, -1).sum(axis=1)
        halves = p.reshape(1 << (i + 1), -1).sum(axis=1)
        ones = halves[1::2]
        with np.errstate(divide="ignore", invalid="ignore"):
            cond1 = np.where(prefix > 0, ones / np.where(prefix > 0, prefix, 1.0), 0.0)
        bad = cond1 > eta + beta + 1e-12
        bad_count += np.repeat(bad, size >> i)

    in_g = (bad_count < delta * m) & (p > 0)
    mass = float(p[in_g].sum())
    status = FOUND if mass >= eps / 2 else FAILED
    return WitnessReport(
        status,
        witness_mass=mass,
        witness_size=int(in_g.sum()),
        detail={"required_mass": eps / 2},
    )
