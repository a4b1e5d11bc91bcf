"""Public transcript of a protocol session.

Every byte either party reveals goes through a :class:`MessageLog`. The
log is the authenticated classical channel: an ordered list of messages,
each tagged with the sending side ("A" or "B"). Payloads are typed by a
one-byte kind tag so that a third party (or an eavesdropper) can decode
the transcript without any private state.

An optional byte-exact framing (4-byte big-endian length prefix) is
provided for cross-process replay of a message sequence.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from . import bits

# Payload kind tags.
KIND_BELL_SET = 0x01        # A: sorted Bell-round indices
KIND_BELL_IO_A = 0x02       # A: (x_i, a_i) for i in the Bell set, in sorted order
KIND_BELL_IO_B = 0x03       # B: (y_i, b_i) for i in the Bell set, in sorted order
KIND_INPUTS_A = 0x04        # A: the full input string x
KIND_INPUTS_B = 0x05        # B: the full input string y
KIND_RECON_SEED = 0x06      # A: public randomness seed for reconciliation permutations
KIND_RECON_PARITIES = 0x07  # B: block parities for one pass (leakage)
KIND_RECON_MISMATCH = 0x08  # A: block mismatch indicators for one pass
KIND_RECON_BISECT_B = 0x09  # B: one sub-block parity bit (leakage)
KIND_RECON_BISECT_A = 0x0A  # A: one steering bit during bisection
KIND_RECON_TAG_SEED = 0x0B  # A: public seed for the verification tag
KIND_RECON_TAG = 0x0C       # B: verification tag bits (leakage)
KIND_PA_SPEC = 0x0D         # A: privacy-amplification backend, length and seed

# Kinds whose payload bits count as reconciliation leakage (Bob's
# data-dependent disclosures).
LEAKAGE_KINDS = frozenset({KIND_RECON_PARITIES, KIND_RECON_BISECT_B, KIND_RECON_TAG})

PA_BACKEND_IDS = {"toeplitz": 0, "trevisan": 1}
PA_BACKEND_NAMES = {v: k for k, v in PA_BACKEND_IDS.items()}


@dataclass(frozen=True)
class Message:
    sender: str  # "A" or "B"
    seq: int
    payload: bytes

    @property
    def kind(self) -> int:
        return self.payload[0]

    def to_json_obj(self) -> dict:
        return {"from": self.sender, "seq": self.seq, "payload": self.payload.hex()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Message":
        return cls(obj["from"], obj["seq"], bytes.fromhex(obj["payload"]))


class MessageLog:
    """Ordered public message log with an optional live observer."""

    def __init__(self, observer: Optional[Callable[[Message], None]] = None):
        self.messages: list[Message] = []
        self._observer = observer

    def append(self, sender: str, payload: bytes) -> Message:
        if sender not in ("A", "B"):
            raise ValueError("sender must be 'A' or 'B'")
        msg = Message(sender, len(self.messages), payload)
        self.messages.append(msg)
        if self._observer is not None:
            self._observer(msg)
        return msg

    def __iter__(self) -> Iterator[Message]:
        return iter(self.messages)

    def __len__(self) -> int:
        return len(self.messages)

    def leakage_bits(self) -> int:
        """Exact count of Bob's disclosed data bits during reconciliation."""
        total = 0
        for msg in self.messages:
            if msg.sender == "B" and msg.kind in LEAKAGE_KINDS:
                total += decode_bitfield(msg.payload)[1].size
        return total


# ---------------------------------------------------------------------------
# Payload encoders / decoders.

def encode_index_set(kind: int, indices) -> bytes:
    indices = np.asarray(indices, dtype=np.uint32)
    return bytes([kind]) + struct.pack(">I", indices.size) + indices.astype(">u4").tobytes()


def decode_index_set(payload: bytes) -> tuple[int, np.ndarray]:
    kind = payload[0]
    (count,) = struct.unpack(">I", payload[1:5])
    idx = np.frombuffer(payload[5 : 5 + 4 * count], dtype=">u4").astype(np.int64)
    return kind, idx


def encode_symbol_pairs(kind: int, first, second) -> bytes:
    first = np.asarray(first, dtype=np.uint8)
    second = np.asarray(second, dtype=np.uint8)
    body = np.empty(2 * first.size, dtype=np.uint8)
    body[0::2] = first
    body[1::2] = second
    return bytes([kind]) + struct.pack(">I", first.size) + body.tobytes()


def decode_symbol_pairs(payload: bytes) -> tuple[int, np.ndarray, np.ndarray]:
    kind = payload[0]
    (count,) = struct.unpack(">I", payload[1:5])
    body = np.frombuffer(payload[5 : 5 + 2 * count], dtype=np.uint8)
    return kind, body[0::2].copy(), body[1::2].copy()


def encode_symbols(kind: int, values) -> bytes:
    values = np.asarray(values, dtype=np.uint8)
    return bytes([kind]) + struct.pack(">I", values.size) + values.tobytes()


def decode_symbols(payload: bytes) -> tuple[int, np.ndarray]:
    kind = payload[0]
    (count,) = struct.unpack(">I", payload[1:5])
    return kind, np.frombuffer(payload[5 : 5 + count], dtype=np.uint8).copy()


def encode_bitfield(kind: int, bit_array) -> bytes:
    """Bits packed little-endian within bytes, with an explicit bit count."""
    arr = bits.as_bits(bit_array)
    return bytes([kind]) + struct.pack(">I", arr.size) + bits.pack_bits(arr)


def decode_bitfield(payload: bytes) -> tuple[int, np.ndarray]:
    kind = payload[0]
    (count,) = struct.unpack(">I", payload[1:5])
    return kind, bits.unpack_bits(payload[5:], count)


def encode_uint(kind: int, value: int) -> bytes:
    return bytes([kind]) + struct.pack(">Q", value)


def decode_uint(payload: bytes) -> tuple[int, int]:
    return payload[0], struct.unpack(">Q", payload[1:9])[0]


def encode_pa_spec(backend: str, out_len: int, build_seed: int, seed_bits) -> bytes:
    arr = bits.as_bits(seed_bits)
    head = bytes([KIND_PA_SPEC, PA_BACKEND_IDS[backend]])
    head += struct.pack(">IQI", out_len, build_seed, arr.size)
    return head + bits.pack_bits(arr)


def decode_pa_spec(payload: bytes) -> dict:
    backend = PA_BACKEND_NAMES[payload[1]]
    out_len, build_seed, nbits = struct.unpack(">IQI", payload[2:18])
    return {
        "backend": backend,
        "out_len": out_len,
        "build_seed": build_seed,
        "seed_bits": bits.unpack_bits(payload[18:], nbits),
    }


# ---------------------------------------------------------------------------
# Optional cross-process framing: length-prefixed payloads.

def frame(payload: bytes) -> bytes:
    return struct.pack(">I", len(payload)) + payload


def iter_frames(stream: bytes) -> Iterator[bytes]:
    pos = 0
    while pos < len(stream):
        if pos + 4 > len(stream):
            raise ValueError("truncated frame header")
        (length,) = struct.unpack(">I", stream[pos : pos + 4])
        pos += 4
        if pos + length > len(stream):
            raise ValueError("truncated frame body")
        yield stream[pos : pos + length]
        pos += length


def frame_log(log: MessageLog) -> bytes:
    """Serialize a message sequence as alternating sender-tagged frames."""
    out = b""
    for msg in log:
        out += frame(msg.sender.encode("ascii") + msg.payload)
    return out


def messages_to_json(log: MessageLog) -> list[dict]:
    return [m.to_json_obj() for m in log]


def messages_from_json(objs: list[dict]) -> MessageLog:
    log = MessageLog()
    for obj in objs:
        log.messages.append(Message.from_json_obj(obj))
    return log


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
