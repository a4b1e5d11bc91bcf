"""Black-box device pairs: honest quantum devices and classical cheaters.

A :class:`DevicePair` answers one round at a time: round(i, x, y) ->
(a, b) with x in {0,1,2}, y in {0,1}, a, b in {0,1}. The isolation
contract is that side A's output may depend only on its own input
history, its own side of the pre-shared tape and its own randomness
(and symmetrically for side B). For fully classical pairs the test
suite verifies this by replay; honest devices realize the quantum
correlations physically, which no local classical sampling can
reproduce, so their joint sampling is exempt by construction.

A pair instance is single-session and single-threaded. Distinct
instances are independent.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import qsim
from .qsim import BasisAngle

ALICE_INPUTS = (0, 1, 2)
BOB_INPUTS = (0, 1)


@dataclass(frozen=True)
class AngleTable:
    """Measurement angles per input: three for side A, two for side B."""

    alice: tuple[BasisAngle, BasisAngle, BasisAngle]
    bob: tuple[BasisAngle, BasisAngle]

    @classmethod
    def from_floats(cls, alice: Sequence[float], bob: Sequence[float]) -> "AngleTable":
        return cls(
            tuple(BasisAngle(t) for t in alice),
            tuple(BasisAngle(t) for t in bob),
        )


# The canonical table attains the quantum optimum on every constrained
# input pair. It is the textbook chained arrangement: the two bases
# quoted at 3*pi/8 are used with outcomes swapped, which is the same
# basis rotated to -pi/8.
CANONICAL_ANGLES = AngleTable.from_floats(
    alice=(0.0, math.pi / 4, -math.pi / 8),
    bob=(math.pi / 8, -math.pi / 8),
)

# The same angles without the outcome relabeling of the 3*pi/8 bases.
# Deliberately suboptimal; kept for the regression test showing the
# relabeling is load-bearing.
LITERAL_ANGLES = AngleTable.from_floats(
    alice=(0.0, math.pi / 4, 3 * math.pi / 8),
    bob=(math.pi / 8, 3 * math.pi / 8),
)


class DevicePair:
    """Base class for stateful black-box device pairs."""

    def __init__(self, tape: bytes = b""):
        self.tape = tape

    def round(self, i: int, x: int, y: int) -> tuple[int, int]:
        raise NotImplementedError


class HonestPair(DevicePair):
    """Honest devices: a fresh EPR pair each round, depolarized at rate p,
    measured in the configured bases.

    Because each round uses a fresh state, the per-round outcome tables
    depend only on (x, y); they are computed once at construction and
    sampled per round.
    """

    def __init__(self, noise: float, rng: np.random.Generator, angles: AngleTable = CANONICAL_ANGLES):
        if not 0 <= noise <= 1:
            raise ValueError(f"noise must be in [0, 1], got {noise}")
        super().__init__()
        self.noise = noise
        self.angles = angles
        self._rng = rng
        state = qsim.apply_depolarizing(qsim.epr_pair(), noise)
        self._tables = {
            (x, y): qsim.outcome_distribution(state, angles.alice[x], angles.bob[y])
            for x in ALICE_INPUTS
            for y in BOB_INPUTS
        }

    def round(self, i: int, x: int, y: int) -> tuple[int, int]:
        return qsim.sample_outcome(self._tables[(x, y)], self._rng)


class DeterministicPair(DevicePair):
    """Classical pair with fixed response functions and no randomness."""

    def __init__(self, fa: Sequence[int], fb: Sequence[int]):
        super().__init__()
        self.fa = tuple(int(v) for v in fa)
        self.fb = tuple(int(v) for v in fb)
        if len(self.fa) != 3 or len(self.fb) != 2:
            raise ValueError("fa must map {0,1,2} and fb must map {0,1}")

    def round(self, i: int, x: int, y: int) -> tuple[int, int]:
        return self.fa[x], self.fb[y]


SideStrategy = Callable[[tuple, bytes, int, int], int]


class MemoryPair(DevicePair):
    """Classical pair whose sides compute outputs from their own full
    history (input, output pairs so far), the shared tape and the round
    index. Structurally isolated: each side sees only its own input.
    """

    def __init__(self, strategy_a: SideStrategy, strategy_b: SideStrategy, tape: bytes = b""):
        super().__init__(tape)
        self._fa = strategy_a
        self._fb = strategy_b
        self._hist_a: list[tuple[int, int]] = []
        self._hist_b: list[tuple[int, int]] = []

    def round(self, i: int, x: int, y: int) -> tuple[int, int]:
        a = int(self._fa(tuple(self._hist_a), self.tape, i, x)) & 1
        b = int(self._fb(tuple(self._hist_b), self.tape, i, y)) & 1
        self._hist_a.append((x, a))
        self._hist_b.append((y, b))
        return a, b


def _prf_unit(tape: bytes, label: bytes, i: int) -> float:
    """Deterministic uniform draw in [0, 1) keyed by the tape."""
    digest = hashlib.sha256(tape + label + struct.pack(">Q", i)).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _prf_index(tape: bytes, label: bytes, i: int, mod: int) -> int:
    digest = hashlib.sha256(tape + label + struct.pack(">Q", i)).digest()
    return int.from_bytes(digest[8:16], "big") % mod


class CovertChannelPair(HonestPair):
    """Honest noiseless devices with a covert classical channel on Bob's side.

    Rounds where the tape-keyed schedule fires ("slots") each carry one
    bit of the planted secret; in a slot whose secret bit is 1 Bob's
    output is flipped. Slots fire at rate 2 * flip_rate, so with a
    balanced secret the average flip rate is flip_rate. The schedule is
    a deterministic function of the tape alone, so anyone holding a
    copy of the tape can locate the slots in the public Bell-round
    announcements and decode.
    """

    def __init__(
        self,
        secret: Sequence[int],
        flip_rate: float,
        rng: np.random.Generator,
        tape: Optional[bytes] = None,
    ):
        if not 0 <= flip_rate <= 1:
            raise ValueError(f"flip_rate must be in [0, 1], got {flip_rate}")
        super().__init__(0.0, rng)
        self.secret = tuple(int(v) & 1 for v in secret)
        if not self.secret:
            raise ValueError("secret must be nonempty")
        self.flip_rate = flip_rate
        self.tape = tape if tape is not None else rng.bytes(32)

    def slot(self, i: int) -> bool:
        return _prf_unit(self.tape, b"slot", i) < 2 * self.flip_rate

    def slot_index(self, i: int) -> int:
        return _prf_index(self.tape, b"idx", i, len(self.secret))

    def flips(self, i: int) -> bool:
        return self.slot(i) and self.secret[self.slot_index(i)] == 1

    def round(self, i: int, x: int, y: int) -> tuple[int, int]:
        a, b = super().round(i, x, y)
        if self.flips(i):
            b ^= 1
        return a, b


def honest_pair(noise: float, rng: np.random.Generator, angles: AngleTable = CANONICAL_ANGLES) -> HonestPair:
    """Honest devices with depolarizing noise at rate `noise`."""
    return HonestPair(noise, rng, angles)


def deterministic_pair(fa: Sequence[int], fb: Sequence[int]) -> DeterministicPair:
    return DeterministicPair(fa, fb)


def memory_pair(strategy_a: SideStrategy, strategy_b: SideStrategy, tape: bytes = b"") -> MemoryPair:
    return MemoryPair(strategy_a, strategy_b, tape)


def covert_channel_pair(
    secret: Sequence[int],
    flip_rate: float,
    rng: np.random.Generator,
    tape: Optional[bytes] = None,
) -> CovertChannelPair:
    return CovertChannelPair(secret, flip_rate, rng, tape)


def tape_sync_pair(tape: bytes) -> MemoryPair:
    """Both sides emit the tape bit of the current round: always-equal
    outputs, the best classical behavior for the equality constraint."""

    def side(history, t, i, _inp):
        return (t[(i // 8) % len(t)] >> (i % 8)) & 1 if t else 0

    return MemoryPair(side, side, tape)
