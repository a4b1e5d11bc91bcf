"""Interactive information reconciliation with exact leakage accounting.

Alice corrects her string toward Bob's by comparing block parities and
bisecting mismatched blocks, cascade-style: a correction made in a
later pass re-opens the earlier-pass blocks containing the corrected
position. The first pass uses blocks of ceil(0.73 / q_est) bits, the
second doubles the block size under an independent public permutation,
and two further doubling passes mop up error pairs that happen to
collide in both of the first two partitions.

Every data-dependent bit Bob discloses (block parities, bisection
parities, the verification tag) is written to the message log and
counted in leakage_bits. Alice's messages (permutation seeds, mismatch
indicators, bisection steering) are input-independent or concern her
own string and are not counted.

Verification is a two-universal (Toeplitz) tag over a public seed:
ceil(log2(2/eps)) tag bits, so unequal strings slip through with
probability at most 2^-tagbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bits, transcript
from .extract import toeplitz_hash
from .transcript import MessageLog


def binary_entropy(q: float) -> float:
    """Base-2 binary entropy; H(0) = H(1) = 0 by continuity."""
    if not 0 <= q <= 1:
        raise ValueError(f"probability must be in [0, 1], got {q}")
    if q in (0.0, 1.0):
        return 0.0
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


@dataclass
class ReconResult:
    corrected: np.ndarray   # Alice's reconciled copy of Bob's string
    leakage_bits: int       # exact count of bits Bob disclosed
    success: bool           # verification tag outcome
    passes: int             # number of parity passes executed


class _Party:
    """One side's view of the block structure: its own string plus the
    per-pass permutations (public)."""

    def __init__(self, data: np.ndarray, perms: list[np.ndarray], block_sizes: list[int]):
        self.data = data
        self.blocks: list[list[np.ndarray]] = []
        self.block_of: list[np.ndarray] = []
        for perm, size in zip(perms, block_sizes):
            blks = [perm[i : i + size] for i in range(0, perm.size, size)]
            owner = np.empty(perm.size, dtype=np.int64)
            for bi, blk in enumerate(blks):
                owner[blk] = bi
            self.blocks.append(blks)
            self.block_of.append(owner)

    def parity(self, p: int, bi: int) -> int:
        return int(self.data[self.blocks[p][bi]].sum() & 1)

    def pass_parities(self, p: int) -> np.ndarray:
        return np.array([self.data[blk].sum() & 1 for blk in self.blocks[p]], dtype=np.uint8)


def reconcile(
    alice,
    bob,
    q_est: float,
    eps: float,
    rng: np.random.Generator,
    log: Optional[MessageLog] = None,
) -> ReconResult:
    """Reconcile Alice's string toward Bob's.

    q_est is the estimated error rate sizing the blocks; q_est = 0 runs
    verification only. eps sets the tag length ceil(log2(2/eps)). rng
    supplies Alice's public randomness (permutations, tag seed), which
    is disclosed in the log.
    """
    alice = bits.as_bits(alice).copy()
    bob = bits.as_bits(bob)
    if alice.size != bob.size:
        raise ValueError(f"length mismatch: {alice.size} vs {bob.size}")
    if alice.size == 0:
        raise ValueError("strings must be nonempty")
    if not 0 <= q_est <= 0.25:
        raise ValueError(f"q_est must be in [0, 0.25], got {q_est}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if log is None:
        log = MessageLog()

    n = alice.size
    leakage = 0
    passes = 0

    if q_est > 0:
        # Blocks larger than n/8 co-locate error pairs across passes and
        # leave them invisible to every parity; cap the whole schedule.
        cap = max(2, n // 8)
        k1 = min(cap, math.ceil(0.73 / q_est))
        block_sizes = [k1] + [min(cap, f * k1) for f in (2, 2, 4)]

        # Pass 1 runs in natural order; later passes use independent
        # permutations derived from a published seed.
        perm_seed = int(rng.integers(0, 2**63))
        log.append("A", transcript.encode_uint(transcript.KIND_RECON_SEED, perm_seed))
        perm_rng = np.random.default_rng(perm_seed)
        perms = [np.arange(n, dtype=np.int64)]
        perms += [perm_rng.permutation(n).astype(np.int64) for _ in block_sizes[1:]]

        side_a = _Party(alice, perms, block_sizes)
        side_b = _Party(bob, perms, block_sizes)
        bob_parities: list[np.ndarray] = []

        def bisect(p: int, bi: int) -> int:
            """Binary-search one mismatched block; returns the corrected
            position. Bob reveals one sub-parity per level."""
            nonlocal leakage
            idx = side_a.blocks[p][bi]
            while idx.size > 1:
                half = idx.size // 2
                left = idx[:half]
                bob_left = int(side_b.data[left].sum() & 1)
                log.append("B", transcript.encode_bitfield(transcript.KIND_RECON_BISECT_B, [bob_left]))
                leakage += 1
                go_left = int(side_a.data[left].sum() & 1) != bob_left
                log.append("A", transcript.encode_bitfield(
                    transcript.KIND_RECON_BISECT_A, [1 if go_left else 0]))
                idx = left if go_left else idx[half:]
            pos = int(idx[0])
            side_a.data[pos] ^= 1
            return pos

        for p, _size in enumerate(block_sizes):
            passes += 1
            bp = side_b.pass_parities(p)
            bob_parities.append(bp)
            log.append("B", transcript.encode_bitfield(transcript.KIND_RECON_PARITIES, bp))
            leakage += bp.size

            ap = side_a.pass_parities(p)
            mism = (ap != bp).astype(np.uint8)
            log.append("A", transcript.encode_bitfield(transcript.KIND_RECON_MISMATCH, mism))

            queue = [(p, bi) for bi in np.flatnonzero(mism)]
            while queue:
                cp, cbi = queue.pop()
                if side_a.parity(cp, cbi) == int(bob_parities[cp][cbi]):
                    continue
                pos = bisect(cp, cbi)
                # The correction flips the parity of every revealed
                # pass's block containing pos; re-check them all.
                for rp in range(len(bob_parities)):
                    queue.append((rp, int(side_a.block_of[rp][pos])))

        alice = side_a.data

    # Verification tag over a fresh public seed.
    tag_bits = max(1, math.ceil(math.log2(2 / eps)))
    tag_seed = bits.random_bits(rng, n + tag_bits - 1)
    log.append("A", transcript.encode_bitfield(transcript.KIND_RECON_TAG_SEED, tag_seed))
    tag_b = toeplitz_hash(bob, tag_seed, tag_bits)
    log.append("B", transcript.encode_bitfield(transcript.KIND_RECON_TAG, tag_b))
    leakage += tag_bits
    tag_a = toeplitz_hash(alice, tag_seed, tag_bits)
    success = bool(np.array_equal(tag_a, tag_b))

    return ReconResult(corrected=alice, leakage_bits=leakage, success=success, passes=passes)
