"""Eavesdropper strategies and empirical security evaluation.

An :class:`EveStrategy` sees exactly the public message log of each
session (plus, for colluding models, a copy of the devices' pre-shared
tape). It never holds a reference to device internals or private
outputs; the evaluation harness hands it only message objects, raw-key
positions and the target key length.

The evaluation is an empirical stand-in for a security statement: it
measures how well a concrete classical strategy with transcript access
predicts the raw key and the final key. This is strictly weaker than an
information-theoretic guarantee against all quantum adversaries; it is
the falsifiable claim the simulation can test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import analysis, bits, extract, transcript
from .devices import DevicePair
from .protocol import ProtocolParams, run_session
from .transcript import Message


class _SessionView:
    """Public per-session state reconstructed from observed messages."""

    def __init__(self):
        self.bell_set: Optional[np.ndarray] = None
        self.bell_x = self.bell_a = None
        self.bell_y = self.bell_b = None
        self.inputs_x: Optional[np.ndarray] = None
        self.inputs_y: Optional[np.ndarray] = None
        self.pa_spec: Optional[dict] = None

    def absorb(self, msg: Message) -> None:
        kind = msg.kind
        if kind == transcript.KIND_BELL_SET:
            self.bell_set = transcript.decode_index_set(msg.payload)[1]
        elif kind == transcript.KIND_BELL_IO_A:
            _, self.bell_x, self.bell_a = transcript.decode_symbol_pairs(msg.payload)
        elif kind == transcript.KIND_BELL_IO_B:
            _, self.bell_y, self.bell_b = transcript.decode_symbol_pairs(msg.payload)
        elif kind == transcript.KIND_INPUTS_A:
            self.inputs_x = transcript.decode_symbols(msg.payload)[1]
        elif kind == transcript.KIND_INPUTS_B:
            self.inputs_y = transcript.decode_symbols(msg.payload)[1]
        elif kind == transcript.KIND_PA_SPEC:
            self.pa_spec = transcript.decode_pa_spec(msg.payload)


class EveStrategy:
    """Base eavesdropper: observes public messages, guesses keys."""

    def __init__(self):
        self.view = _SessionView()

    def session_start(self) -> None:
        self.view = _SessionView()

    def observe(self, message: Message) -> None:
        self.view.absorb(message)

    def guess_raw_key(self, positions) -> np.ndarray:
        raise NotImplementedError

    def guess_final_key(self, length: int) -> np.ndarray:
        """Hash the stored raw-key guess with the published seed, i.e.
        run the same privacy amplification Eve observed."""
        spec = self.view.pa_spec
        guess = getattr(self, "_last_raw_guess", None)
        if spec is None or guess is None:
            return np.zeros(length, dtype=np.uint8)
        if spec["backend"] == "toeplitz":
            return extract.toeplitz_hash(guess, spec["seed_bits"], spec["out_len"])[:length]
        ext = extract.build_extractor_spec(
            guess.size, spec["out_len"], np.random.default_rng(spec["build_seed"])
        )
        return extract.trevisan_extract(guess, spec["seed_bits"], ext)[:length]


class TranscriptEve(EveStrategy):
    """Maximum-likelihood guesser trained on announced test rounds.

    Accumulates empirical outcome counts for Bob's output per input pair
    across every Bell announcement it has seen (all sessions so far),
    then guesses each raw-key bit as the most likely output for that
    round's revealed inputs. Against honest devices the check-round
    outputs are conditionally uniform given the transcript, so this
    collapses to even-odds guessing; against devices whose outputs are
    functions of the public inputs it becomes exact.
    """

    def __init__(self):
        super().__init__()
        self.counts = np.zeros((3, 2, 2), dtype=np.int64)  # [x][y][b]

    def session_start(self) -> None:
        self._fold_session()
        super().session_start()

    def _fold_session(self) -> None:
        v = self.view
        if v.bell_x is not None and v.bell_y is not None:
            np.add.at(self.counts, (v.bell_x, v.bell_y, v.bell_b), 1)
            v.bell_x = None

    def guess_raw_key(self, positions) -> np.ndarray:
        self._fold_session()
        positions = np.asarray(positions, dtype=np.int64)
        v = self.view
        if v.inputs_x is None or v.inputs_y is None:
            guess = np.zeros(positions.size, dtype=np.uint8)
        else:
            xs = v.inputs_x[positions]
            ys = v.inputs_y[positions]
            guess = (self.counts[xs, ys, 1] > self.counts[xs, ys, 0]).astype(np.uint8)
        self._last_raw_guess = guess
        return guess


def transcript_eve() -> TranscriptEve:
    return TranscriptEve()


class CovertDecoderEve(EveStrategy):
    """Colluding eavesdropper holding a copy of the devices' tape.

    Locates the covert channel's slots among the announced Bell rounds
    and decodes each planted secret bit by likelihood ratio: a flipped
    round disagrees where honest noiseless devices would agree (certain
    on input pair (2,1), strongly biased elsewhere).
    """

    def __init__(self, tape: bytes, flip_rate: float, secret_bits: int,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.tape = tape
        self.flip_rate = flip_rate
        self.secret_bits = secret_bits
        self._rng = rng if rng is not None else np.random.default_rng(0)
        table = analysis.BehaviorTable.honest(0.0)
        self._p_neq = {
            (x, y): min(max(float(table.p[x, y, 0, 1] + table.p[x, y, 1, 0]), 1e-9), 1 - 1e-9)
            for x in (0, 1, 2)
            for y in (0, 1)
        }

    def decode_secret(self) -> np.ndarray:
        from .devices import _prf_index, _prf_unit  # schedule shared with the pair

        llr = np.zeros(self.secret_bits)
        v = self.view
        if v.bell_set is None or v.bell_x is None or v.bell_y is None:
            return np.zeros(self.secret_bits, dtype=np.uint8)
        for j, i in enumerate(v.bell_set.tolist()):
            if _prf_unit(self.tape, b"slot", i) >= 2 * self.flip_rate:
                continue
            idx = _prf_index(self.tape, b"idx", i, self.secret_bits)
            xy = (int(v.bell_x[j]), int(v.bell_y[j]))
            neq = int(v.bell_a[j]) != int(v.bell_b[j])
            p0 = self._p_neq[xy] if neq else 1 - self._p_neq[xy]
            p1 = (1 - self._p_neq[xy]) if neq else self._p_neq[xy]
            llr[idx] += math.log(p1) - math.log(p0)
        return (llr > 0).astype(np.uint8)

    def guess_raw_key(self, positions) -> np.ndarray:
        # The covert channel leaks the planted secret, not the raw key.
        guess = bits.random_bits(self._rng, np.asarray(positions).size)
        self._last_raw_guess = guess
        return guess


def covert_decoder_eve(tape: bytes, flip_rate: float, secret_bits: int,
                       rng: Optional[np.random.Generator] = None) -> CovertDecoderEve:
    return CovertDecoderEve(tape, flip_rate, secret_bits, rng)


# ---------------------------------------------------------------------------
# Batch evaluation.

@dataclass
class SecurityReport:
    sessions: int
    abort_rate: float
    mean_key_len: float
    per_bit_guess_rate: Optional[float]
    final_key_guess_advantage: Optional[float]
    confidence: dict = field(default_factory=dict)
    non_aborted: int = 0
    guessed_bits: int = 0

    def to_json_obj(self) -> dict:
        return {
            "sessions": self.sessions,
            "abort_rate": self.abort_rate,
            "mean_key_len": self.mean_key_len,
            "per_bit_guess_rate": self.per_bit_guess_rate,
            "final_key_guess_advantage": self.final_key_guess_advantage,
            "confidence": {k: list(v) for k, v in self.confidence.items()},
            "non_aborted": self.non_aborted,
            "guessed_bits": self.guessed_bits,
        }


def _interval(p_hat: float, n: int) -> tuple[float, float]:
    """3-sigma binomial interval; falls back to width 3/n at the edges."""
    if n < 1:
        return (0.0, 1.0)
    sigma = math.sqrt(p_hat * (1 - p_hat) / n)
    half = 3 * sigma if sigma > 0 else 3 / n
    return (max(0.0, p_hat - half), min(1.0, p_hat + half))


PairFactory = Callable[[np.random.Generator], DevicePair]


def evaluate_security(
    pair_factory: PairFactory,
    eve: Optional[EveStrategy],
    params: ProtocolParams,
    trials: int,
    rng: np.random.Generator,
) -> SecurityReport:
    """Run independent sessions and aggregate Eve's empirical success.

    Each trial gets its own RNG streams derived from the master
    generator, so reports are bit-exactly reproducible under a fixed
    seed. Aborted sessions contribute to the abort rate and nothing
    else.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    aborts = 0
    key_lens: list[int] = []
    bit_hits = 0
    bit_total = 0
    exact_hits = 0
    chance_sum = 0.0
    keyed_sessions = 0

    for child in rng.spawn(trials):
        dev_rng, proto_rng = child.spawn(2)
        pair = pair_factory(dev_rng)
        if eve is not None:
            eve.session_start()
        result = run_session(pair, eve, params, proto_rng)
        if result.aborted:
            aborts += 1
            continue
        key_lens.append(int(result.alice_key.size))
        if eve is None:
            continue
        raw_pos = result.raw_positions
        if raw_pos.size:
            guess = eve.guess_raw_key(raw_pos)
            truth = result.b[raw_pos]
            bit_hits += int((guess == truth).sum())
            bit_total += truth.size
        if result.alice_key.size:
            keyed_sessions += 1
            fk = eve.guess_final_key(result.alice_key.size)
            exact_hits += int(np.array_equal(fk, result.alice_key))
            chance_sum += 2.0 ** -float(result.alice_key.size)

    non_aborted = trials - aborts
    abort_rate = aborts / trials
    mean_key_len = float(np.mean(key_lens)) if key_lens else 0.0
    per_bit = bit_hits / bit_total if bit_total else None
    advantage = (exact_hits / keyed_sessions - chance_sum / keyed_sessions) if keyed_sessions else None

    confidence = {"abort_rate": _interval(abort_rate, trials)}
    if per_bit is not None:
        confidence["per_bit_guess_rate"] = _interval(per_bit, bit_total)
    if advantage is not None:
        confidence["final_key_guess_rate"] = _interval(exact_hits / keyed_sessions, keyed_sessions)

    return SecurityReport(
        sessions=trials,
        abort_rate=abort_rate,
        mean_key_len=mean_key_len,
        per_bit_guess_rate=per_bit,
        final_key_guess_advantage=advantage,
        confidence=confidence,
        non_aborted=non_aborted,
        guessed_bits=bit_total,
    )
