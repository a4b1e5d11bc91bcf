"""Minimal exact simulator for a pair of qubits.

Dense 4x4 complex density matrices (basis order |00>, |01>, |10>, |11>),
projective measurements in rotated computational bases, and depolarizing
noise. Correctness over speed: states are tiny, all arithmetic is exact
dense linear algebra.

Randomness is always passed in explicitly, so every function here is
pure and safe to use concurrently with per-caller RNG streams.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

TRACE_TOL = 1e-12
HERMITIAN_TOL = 1e-12
EIGEN_TOL = 1e-10


class TwoQubitState:
    """Density matrix of a two-qubit system.

    Validates the physicality invariants on construction: unit trace,
    Hermiticity, and positive semidefiniteness (up to numerical slack).
    """

    def __init__(self, rho: np.ndarray):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {rho.shape}")
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise ValueError(f"trace must be 1, got {np.trace(rho)}")
        if np.abs(rho - rho.conj().T).max() > HERMITIAN_TOL:
            raise ValueError("matrix is not Hermitian")
        if np.linalg.eigvalsh(rho).min() < -EIGEN_TOL:
            raise ValueError("matrix has a significantly negative eigenvalue")
        rho.setflags(write=False)
        self._rho = rho

    @property
    def rho(self) -> np.ndarray:
        return self._rho

    def __repr__(self) -> str:
        return f"TwoQubitState(trace={np.trace(self._rho).real:.6f})"


class BasisAngle:
    """Measurement basis {cos t |0> + sin t |1>, -sin t |0> + cos t |1>}.

    Angles are normalized mod pi into (-pi/2, pi/2]: adding pi to the
    angle only flips global phases of the basis vectors, so it is the
    same measurement. (A shift by pi/2 is the same basis with outcomes
    swapped; callers who want that relabeling apply it themselves.)
    """

    def __init__(self, theta: float):
        t = math.fmod(float(theta), math.pi)
        if t > math.pi / 2:
            t -= math.pi
        elif t <= -math.pi / 2:
            t += math.pi
        self.theta = t

    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([c, s]), np.array([-s, c])

    def __repr__(self) -> str:
        return f"BasisAngle({self.theta:.6f})"

    def __eq__(self, other) -> bool:
        return isinstance(other, BasisAngle) and self.theta == other.theta


AngleLike = Union[BasisAngle, float]


def _angle(theta: AngleLike) -> BasisAngle:
    return theta if isinstance(theta, BasisAngle) else BasisAngle(theta)


def epr_pair() -> TwoQubitState:
    """The maximally entangled state (|00> + |11>) / sqrt(2)."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1 / math.sqrt(2)
    return TwoQubitState(np.outer(psi, psi.conj()))


def apply_depolarizing(state: TwoQubitState, p: float) -> TwoQubitState:
    """Mix the state with the maximally mixed one: (1-p) rho + p I/4."""
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing probability must be in [0, 1], got {p}")
    rho = (1 - p) * state.rho + p * np.eye(4) / 4
    return TwoQubitState(rho)


def outcome_distribution(state: TwoQubitState, theta_a: AngleLike, theta_b: AngleLike) -> np.ndarray:
    """Joint outcome probabilities table[a][b] for projective measurements.

    Side A measures in the basis rotated by theta_a, side B by theta_b.
    For the EPR pair, P(a = b) = cos^2(theta_a - theta_b).
    """
    va = _angle(theta_a).vectors()
    vb = _angle(theta_b).vectors()
    table = np.empty((2, 2))
    for a in (0, 1):
        pa = np.outer(va[a], va[a])
        for b in (0, 1):
            proj = np.kron(pa, np.outer(vb[b], vb[b]))
            table[a, b] = np.trace(proj @ state.rho).real
    # Clip tiny negatives from roundoff; the result stays normalized.
    np.clip(table, 0.0, 1.0, out=table)
    return table


def measure_joint(
    state: TwoQubitState,
    theta_a: AngleLike,
    theta_b: AngleLike,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Sample one joint outcome (a, b) from outcome_distribution.

    Outcomes are drawn in the fixed order (0,0), (0,1), (1,0), (1,1)
    against a single uniform draw, so a given rng stream reproduces the
    same outcome sequence.
    """
    table = outcome_distribution(state, theta_a, theta_b)
    return sample_outcome(table, rng)


def sample_outcome(table: np.ndarray, rng: np.random.Generator) -> tuple[int, int]:
    u = rng.random()
    if u < table[0, 0]:
        return 0, 0
    u -= table[0, 0]
    if u < table[0, 1]:
        return 0, 1
    u -= table[0, 1]
    if u < table[1, 0]:
        return 1, 0
    return 1, 1
