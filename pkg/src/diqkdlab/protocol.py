"""Two-party key-distribution protocol over an authenticated transcript.

`run_generation` drives the device pair for m rounds with fresh uniform
inputs, reveals a random test subset ("Bell rounds") and aborts if the
observed satisfaction rate falls short of the quantum optimum by more
than the tolerated eta. `run_session` continues: all inputs are
revealed, the rounds with input pair (2, 1) form the check set, the
check-set outputs outside the test set form the raw key, Alice
reconciles toward Bob with counted leakage, and both sides hash down to
the final key with a published seed.

Abort decisions are pure functions of the public transcript; a third
party can re-run every check from the message log and the revealed
data. The authenticated channel is an in-memory ordered log (integrity
assumed); see `transcript` for the optional byte-exact framing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import analysis, bits, extract, recon, transcript
from .analysis import chsh_satisfied, chsh_satisfied_array  # re-exported protocol surface
from .devices import DevicePair
from .transcript import MessageLog

ABORT_BELL_TEST = "BELL_TEST"
ABORT_CHECK_COUNT = "CHECK_COUNT"
ABORT_RECON_FAIL = "RECON_FAIL"

DEFAULT_C_GAMMA = 20.0

PROTOCOL_RATE_MODEL = analysis.RateModel(
    recon_cost="empirical", o_term_constant=2.0, basis="C_minus_B"
)


class DeviceError(RuntimeError):
    """A device failed to answer a round (raised, out of protocol scope)."""


@dataclass
class ProtocolParams:
    """Session parameters.

    gamma defaults to the derived value (c_gamma / eta^2) ln(1/eps) / m,
    which is only usable when m is astronomically large compared to
    1/eta^2; desk-scale runs pass gamma explicitly. kappa defaults to
    the certified min-entropy rate at the configured eta.
    """

    m: int
    eps: float
    eta: float
    c_gamma: float = DEFAULT_C_GAMMA
    gamma: Optional[float] = None
    kappa: Optional[float] = None
    rate_model: analysis.RateModel = PROTOCOL_RATE_MODEL
    pa_backend: str = "toeplitz"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must be in (0, 1)")
        if not 0 < self.eta < 1:
            raise ValueError("eta must be in (0, 1)")
        if self.c_gamma <= 0:
            raise ValueError("c_gamma must be positive")
        if self.gamma is None:
            self.gamma = (self.c_gamma / self.eta**2) * math.log(1 / self.eps) / self.m
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.bell_count < 1:
            raise ValueError("gamma * m must round to at least one Bell round")
        if self.kappa is None:
            self.kappa = analysis.kappa_bound(self.eta)
        if self.pa_backend not in transcript.PA_BACKEND_IDS:
            raise ValueError(f"unknown privacy-amplification backend {self.pa_backend!r}")

    @property
    def bell_count(self) -> int:
        return int(round(self.gamma * self.m))


@dataclass
class SessionResult:
    """Full record of one session: inputs, outputs, test/check sets, the
    public message log, abort status and final keys. The message log is
    exactly what an eavesdropper sees; the rest is the lab's bookkeeping."""

    m: int
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    bell_set: np.ndarray
    check_set: np.ndarray
    eta_observed: float
    aborted: bool = False
    abort_reason: Optional[str] = None
    leakage_bits: int = 0
    alice_key: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    bob_key: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    public_messages: MessageLog = field(default_factory=MessageLog)

    @property
    def raw_positions(self) -> np.ndarray:
        """Check rounds outside the test set; Bob's bits there are the raw key."""
        return np.setdiff1d(self.check_set, self.bell_set)


def select_bell_rounds(m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random sorted subset of {0..m-1} of the given size."""
    if not 1 <= size <= m:
        raise ValueError(f"size must be in [1, {m}], got {size}")
    return np.sort(rng.choice(m, size=size, replace=False)).astype(np.int64)


def check_count_ok(c_size: int, m: int) -> bool:
    """The check-set size must sit within 10 sqrt(m) of its mean m/6."""
    return abs(c_size - m / 6) <= 10 * math.sqrt(m)


def _drive_rounds(pair: DevicePair, m: int, rng: np.random.Generator):
    xs = rng.integers(0, 3, size=m).astype(np.uint8)
    ys = rng.integers(0, 2, size=m).astype(np.uint8)
    a_out = np.empty(m, dtype=np.uint8)
    b_out = np.empty(m, dtype=np.uint8)
    x_list = xs.tolist()
    y_list = ys.tolist()
    round_fn = pair.round
    for i in range(m):
        try:
            a, b = round_fn(i, x_list[i], y_list[i])
        except Exception as exc:  # devices are untrusted code
            raise DeviceError(f"device pair failed in round {i}: {exc}") from exc
        if a not in (0, 1) or b not in (0, 1):
            raise DeviceError(f"device produced non-bit output in round {i}: {(a, b)}")
        a_out[i] = a
        b_out[i] = b
    return xs, ys, a_out, b_out


def run_generation(
    pair: DevicePair,
    params: ProtocolParams,
    rng: np.random.Generator,
    log: Optional[MessageLog] = None,
) -> SessionResult:
    """Rounds plus parameter estimation; final keys stay empty.

    The test set is chosen only after all m rounds are complete, then
    announced together with both sides' inputs and outputs on it.
    """
    if log is None:
        log = MessageLog()
    xs, ys, a_out, b_out = _drive_rounds(pair, params.m, rng)

    bell = select_bell_rounds(params.m, params.bell_count, rng)
    log.append("A", transcript.encode_index_set(transcript.KIND_BELL_SET, bell))
    log.append("A", transcript.encode_symbol_pairs(transcript.KIND_BELL_IO_A, xs[bell], a_out[bell]))
    log.append("B", transcript.encode_symbol_pairs(transcript.KIND_BELL_IO_B, ys[bell], b_out[bell]))

    check = np.flatnonzero((xs == 2) & (ys == 1)).astype(np.int64)
    result = SessionResult(
        m=params.m, x=xs, y=ys, a=a_out, b=b_out,
        bell_set=bell, check_set=check, eta_observed=0.0,
        public_messages=log,
    )
    _, eta_prime = analysis.estimate_chsh(result, bell)
    result.eta_observed = eta_prime
    if eta_prime > params.eta:
        result.aborted = True
        result.abort_reason = ABORT_BELL_TEST
    return result


def run_session(
    pair: DevicePair,
    eve,
    params: ProtocolParams,
    rng: np.random.Generator,
) -> SessionResult:
    """Full key distribution. `eve` may be None or an object with an
    observe(message) method; it sees exactly the public message log."""
    log = MessageLog(observer=eve.observe if eve is not None else None)
    result = run_generation(pair, params, rng, log=log)
    if result.aborted:
        return result

    log.append("A", transcript.encode_symbols(transcript.KIND_INPUTS_A, result.x))
    log.append("B", transcript.encode_symbols(transcript.KIND_INPUTS_B, result.y))

    if not check_count_ok(result.check_set.size, params.m):
        result.aborted = True
        result.abort_reason = ABORT_CHECK_COUNT
        return result

    raw_pos = result.raw_positions
    if raw_pos.size == 0:
        return result  # degenerate but legal: nothing to distill

    alice_raw = result.a[raw_pos]
    bob_raw = result.b[raw_pos]

    # Public error estimate: observed mismatch on announced check rounds
    # inside the test set, floored by the post-test guarantee 1.1 eta.
    bc = np.intersect1d(result.bell_set, result.check_set)
    observed = float(np.mean(result.a[bc] != result.b[bc])) if bc.size else 0.0
    q_est = min(0.25, max(1.1 * params.eta, observed))

    rr = recon.reconcile(alice_raw, bob_raw, q_est, params.eps, rng, log=log)
    result.leakage_bits = rr.leakage_bits
    if not rr.success:
        result.aborted = True
        result.abort_reason = ABORT_RECON_FAIL
        return result

    n_basis = raw_pos.size if params.rate_model.basis == "C_minus_B" else result.check_set.size
    model = params.rate_model
    if model.recon_cost == "empirical":
        model = replace(model, empirical_cost=rr.leakage_bits / n_basis)
    rc = analysis.recon_cost_rate(model, params.eta)
    rate = max(0.0, params.kappa - rc - model.o_term_constant * math.log2(1 / params.eps) / params.m)
    key_len = int(rate * n_basis)
    if key_len < 1:
        return result

    if params.pa_backend == "toeplitz":
        seed_bits = bits.random_bits(rng, raw_pos.size + key_len - 1)
        log.append("A", transcript.encode_pa_spec("toeplitz", key_len, 0, seed_bits))
        result.alice_key = extract.toeplitz_hash(rr.corrected, seed_bits, key_len)
        result.bob_key = extract.toeplitz_hash(bob_raw, seed_bits, key_len)
    else:
        build_seed = int(rng.integers(0, 2**63))
        spec = extract.build_extractor_spec(raw_pos.size, key_len, np.random.default_rng(build_seed))
        seed_bits = bits.random_bits(rng, spec.d)
        log.append("A", transcript.encode_pa_spec("trevisan", key_len, build_seed, seed_bits))
        result.alice_key = extract.trevisan_extract(rr.corrected, seed_bits, spec)
        result.bob_key = extract.trevisan_extract(bob_raw, seed_bits, spec)
    return result


# ---------------------------------------------------------------------------
# Transcript serialization.

def serialize_session(result: SessionResult) -> str:
    obj = {
        "m": result.m,
        "x": result.x.tolist(),
        "y": result.y.tolist(),
        "a": result.a.tolist(),
        "b": result.b.tolist(),
        "bell_set": result.bell_set.tolist(),
        "check_set": result.check_set.tolist(),
        "eta_observed": result.eta_observed,
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
        "leakage_bits": result.leakage_bits,
        "alice_key": bits.bits_to_hex(result.alice_key),
        "bob_key": bits.bits_to_hex(result.bob_key),
        "messages": transcript.messages_to_json(result.public_messages),
    }
    return transcript.dumps_json(obj)


def deserialize_session(text: str) -> SessionResult:
    obj = json.loads(text)
    log = transcript.messages_from_json(obj["messages"])
    key_len = None
    for msg in log:
        if msg.kind == transcript.KIND_PA_SPEC:
            key_len = transcript.decode_pa_spec(msg.payload)["out_len"]
    def key_bits(hexstr: str) -> np.ndarray:
        raw = bytes.fromhex(hexstr)
        n = key_len if key_len is not None else 8 * len(raw)
        return bits.unpack_bits(raw, min(n, 8 * len(raw)))

    return SessionResult(
        m=obj["m"],
        x=np.asarray(obj["x"], dtype=np.uint8),
        y=np.asarray(obj["y"], dtype=np.uint8),
        a=np.asarray(obj["a"], dtype=np.uint8),
        b=np.asarray(obj["b"], dtype=np.uint8),
        bell_set=np.asarray(obj["bell_set"], dtype=np.int64),
        check_set=np.asarray(obj["check_set"], dtype=np.int64),
        eta_observed=obj["eta_observed"],
        aborted=obj["aborted"],
        abort_reason=obj["abort_reason"],
        leakage_bits=obj["leakage_bits"],
        alice_key=key_bits(obj["alice_key"]),
        bob_key=key_bits(obj["bob_key"]),
        public_messages=log,
    )
