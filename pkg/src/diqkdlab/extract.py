"""Privacy-amplification primitives.

Two independent families:

* Two-universal Toeplitz hashing — the default seeded compressor. An
  (ell x n) binary Toeplitz matrix is defined by n + ell - 1 seed bits,
  entry (i, j) = seed[i - j + n - 1]; hashing is the matrix-vector
  product over GF(2). Distinct inputs collide with probability exactly
  2^-ell over a uniform seed.

* A full one-bit-extractor composition: a weak design reuses one short
  seed across output bits, and each output bit is one position of a
  Reed-Solomon + Hadamard concatenated codeword of the input, indexed
  by the seed restricted to the corresponding design set.

All functions are pure; design construction takes an explicit RNG and
is verified against the definition before being returned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bits

# ---------------------------------------------------------------------------
# GF(2^k) arithmetic via log/antilog tables.

# Primitive polynomials (including the x^k term), one per field size.
# x is a primitive element for each of these.
PRIMITIVE_POLYS = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0b10001000000001011,
}


class GF2k:
    """Finite field GF(2^k) with table-based multiplication."""

    _cache: dict[int, "GF2k"] = {}

    def __new__(cls, k: int):
        if k not in cls._cache:
            inst = super().__new__(cls)
            inst._init(k)
            cls._cache[k] = inst
        return cls._cache[k]

    def _init(self, k: int) -> None:
        if k not in PRIMITIVE_POLYS:
            raise ValueError(f"no primitive polynomial on record for k={k}")
        self.k = k
        self.size = 1 << k
        poly = PRIMITIVE_POLYS[k]
        order = self.size - 1
        exp = np.zeros(2 * order, dtype=np.int64)
        log = np.zeros(self.size, dtype=np.int64)
        v = 1
        for idx in range(order):
            exp[idx] = v
            log[v] = idx
            v <<= 1
            if v & self.size:
                v ^= poly
        if v != 1:
            raise ValueError(f"polynomial {poly:#x} is not primitive for k={k}")
        exp[order:] = exp[:order]
        self._exp, self._log, self._order = exp, log, order

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self._exp[self._log[a] + self._log[b]])

    def mul_vec(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = self._exp[self._log[a] + self._log[b]]
        return np.where((a == 0) | (b == 0), 0, out)

    def poly_eval(self, coeffs: np.ndarray, alphas: np.ndarray) -> np.ndarray:
        """Evaluate the polynomial with the given coefficients (degree
        ascending) at each point of `alphas`, by Horner's rule."""
        acc = np.zeros_like(alphas)
        for c in coeffs[::-1]:
            acc = self.mul_vec(acc, alphas)
            if c:
                acc = acc ^ c
        return acc


# ---------------------------------------------------------------------------
# Toeplitz hashing.

@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits for an (ell x n) Toeplitz matrix; length n + ell - 1."""

    bits: np.ndarray

    @classmethod
    def random(cls, n: int, ell: int, rng: np.random.Generator) -> "ToeplitzSeed":
        return cls(bits.random_bits(rng, n + ell - 1))


def toeplitz_hash(x, seed, ell: int) -> np.ndarray:
    """Hash n input bits to ell output bits over GF(2).

    `seed` is a bit array of length n + ell - 1 (or a ToeplitzSeed).
    Output bit i is the parity of sum_j seed[i - j + n - 1] * x[j].
    """
    x = bits.as_bits(x)
    seed_arr = bits.as_bits(seed.bits if isinstance(seed, ToeplitzSeed) else seed)
    n = x.size
    if seed_arr.size != n + ell - 1:
        raise ValueError(f"seed must have {n + ell - 1} bits, got {seed_arr.size}")
    if n == 0:
        return np.zeros(ell, dtype=np.uint8)
    # Row i of the matrix is rev[ell-1-i : ell-1-i+n] where rev is the
    # reversed seed; a strided window view gives all rows without copying.
    rev = seed_arr[::-1]
    rows = np.lib.stride_tricks.sliding_window_view(rev, n)[::-1]
    return (rows @ x.astype(np.int64) & 1).astype(np.uint8)


# ---------------------------------------------------------------------------
# Weak designs.

@dataclass
class WeakDesign:
    """m subsets of {0..d-1}, each of size t, with bounded pairwise
    overlap sums: for every i, sum_{j<i} 2^{|S_j n S_i|} <= r*m."""

    sets: list[np.ndarray]
    t: int
    m: int
    d: int

    def to_json_obj(self) -> dict:
        return {"t": self.t, "m": self.m, "d": self.d, "sets": [s.tolist() for s in self.sets]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "WeakDesign":
        return cls(
            [np.asarray(s, dtype=np.int64) for s in obj["sets"]],
            obj["t"], obj["m"], obj["d"],
        )


def verify_weak_design(design: WeakDesign, r: float) -> tuple[bool, dict]:
    """Exact check of both defining clauses; returns the worst index."""
    masks = []
    worst_sum, worst_i = 0, -1
    ok = True
    for i, s in enumerate(design.sets):
        arr = np.asarray(s)
        if arr.size != design.t or np.unique(arr).size != design.t:
            return False, {"reason": "set size", "index": i}
        if arr.min() < 0 or arr.max() >= design.d:
            return False, {"reason": "element out of range", "index": i}
        mask = np.zeros(design.d, dtype=bool)
        mask[arr] = True
        total = 0
        for prev in masks:
            total += 1 << int(np.count_nonzero(mask & prev))
        if total > worst_sum:
            worst_sum, worst_i = total, i
        if total > r * design.m:
            ok = False
        masks.append(mask)
    return ok, {"worst_sum": worst_sum, "worst_index": worst_i, "bound": r * design.m}


def design_seed_length_bound(t: int, m: int) -> int:
    """Seed-length budget t * ceil(t / ln 2) * ceil(log2(4m))."""
    return t * math.ceil(t / math.log(2)) * math.ceil(math.log2(4 * m))


def _least_prime_at_least(n: int) -> int:
    def is_prime(v: int) -> bool:
        if v < 2:
            return False
        f = 2
        while f * f <= v:
            if v % f == 0:
                return False
            f += 1
        return True

    while not is_prime(n):
        n += 1
    return n


def _polynomial_design(t: int, m: int) -> WeakDesign:
    """Polynomial construction over GF(q): the i-th set is the graph
    {(a, p_i(a)) : a < t} of the i-th polynomial of bounded degree,
    enumerated lowest-degree first."""
    q = _least_prime_at_least(max(t, 2))
    c = max(1, math.ceil(math.log(max(m, 2)) / math.log(max(t, 2))))
    if m > q ** (c + 1):
        c = math.ceil(math.log(m) / math.log(q))
    a_vals = np.arange(t, dtype=np.int64)
    sets = []
    for i in range(m):
        # Coefficients are the base-q digits of i, constant term first.
        coeffs, v = [], i
        for _ in range(c + 1):
            coeffs.append(v % q)
            v //= q
        vals = np.zeros(t, dtype=np.int64)
        for coef in reversed(coeffs):
            vals = (vals * a_vals + coef) % q
        sets.append(a_vals * q + vals)
    return WeakDesign(sets, t, m, q * q)


def build_weak_design(
    t: int,
    m: int,
    r_target: float = 2.0,
    rng: Optional[np.random.Generator] = None,
    max_tries: int = 2000,
) -> WeakDesign:
    """Build a weak design with r <= r_target, verified before returning.

    Tries the polynomial construction first, then falls back to a
    random-greedy search over increasing seed lengths. Raises if no
    verified design is found within the retry budget.
    """
    if t < 1 or m < 1:
        raise ValueError("t and m must be positive")
    d_cap = design_seed_length_bound(t, m)
    if m == 1:
        design = WeakDesign([np.arange(t, dtype=np.int64)], t, 1, t)
        ok, _ = verify_weak_design(design, r_target)
        assert ok
        return design

    candidate = _polynomial_design(t, m)
    if candidate.d <= d_cap:
        ok, _ = verify_weak_design(candidate, r_target)
        if ok:
            return candidate

    rng = rng if rng is not None else np.random.default_rng(0)
    d = min(d_cap, max(2 * t, candidate.d))
    while True:
        sets: list[np.ndarray] = []
        masks: list[np.ndarray] = []
        tries = 0
        while len(sets) < m and tries < max_tries:
            tries += 1
            s = np.sort(rng.choice(d, size=t, replace=False))
            mask = np.zeros(d, dtype=bool)
            mask[s] = True
            total = sum(1 << int(np.count_nonzero(mask & prev)) for prev in masks)
            if total <= r_target * m:
                sets.append(s)
                masks.append(mask)
        if len(sets) == m:
            design = WeakDesign(sets, t, m, d)
            ok, report = verify_weak_design(design, r_target)
            if ok:
                return design
        if d >= d_cap:
            raise RuntimeError(
                f"could not build a verified weak design for t={t}, m={m}, "
                f"r<={r_target} within d<={d_cap}"
            )
        d = min(d_cap, 2 * d)


# ---------------------------------------------------------------------------
# Reed-Solomon + Hadamard concatenated code.

@dataclass(frozen=True)
class CodeParams:
    """Message of n bits packed into <= degree+1 symbols of GF(2^k);
    codeword bit indexed by a 2k-bit position (alpha, z) is the GF(2)
    inner product of the symbol p(alpha) with z."""

    n: int
    k: int
    degree: int

    def __post_init__(self):
        if self.k not in PRIMITIVE_POLYS:
            raise ValueError(f"unsupported field exponent k={self.k}")
        if self.degree < 0 or self.degree >= (1 << self.k):
            raise ValueError("degree must satisfy 0 <= degree < 2^k")
        if self.n > (self.degree + 1) * self.k:
            raise ValueError("n exceeds (degree+1)*k message bits")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def nbar(self) -> int:
        return 1 << (2 * self.k)

    @property
    def index_bits(self) -> int:
        return 2 * self.k

    @property
    def distance_bound(self) -> float:
        """Relative Hamming distance of the concatenation is at least
        (1 - degree/2^k) / 2."""
        return (1 - self.degree / (1 << self.k)) / 2


def _message_coeffs(x, code: CodeParams) -> np.ndarray:
    """Pad x to (degree+1)*k bits and pack each k-bit chunk (LSB first)
    into one field element."""
    x = bits.as_bits(x)
    if x.size != code.n:
        raise ValueError(f"expected {code.n} message bits, got {x.size}")
    padded = np.zeros((code.degree + 1) * code.k, dtype=np.uint8)
    padded[: x.size] = x
    weights = (1 << np.arange(code.k, dtype=np.int64))
    return padded.reshape(code.degree + 1, code.k) @ weights


_POPCOUNT8 = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)


def _parity_of_and(symbols: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Parity of popcount(symbols & zs), elementwise."""
    v = (symbols & zs).astype(np.int64)
    out = np.zeros_like(v)
    while True:
        out ^= _POPCOUNT8[v & 0xFF].astype(np.int64)
        v >>= 8
        if not v.any():
            break
    return (out & 1).astype(np.uint8)


def code_bits_at(x, alphas: np.ndarray, zs: np.ndarray, code: CodeParams) -> np.ndarray:
    """Codeword bits of x at positions (alpha_i, z_i), without
    materializing the codeword."""
    coeffs = _message_coeffs(x, code)
    gf = GF2k(code.k)
    syms = gf.poly_eval(coeffs, np.asarray(alphas, dtype=np.int64))
    return _parity_of_and(syms, np.asarray(zs, dtype=np.int64))


def code_bit(x, y_bits, code: CodeParams) -> int:
    """Single codeword bit indexed by 2k position bits (LSB first:
    the low k bits select the evaluation point alpha, the high k bits
    the Hadamard vector z)."""
    y = bits.as_bits(y_bits)
    if y.size != code.index_bits:
        raise ValueError(f"index must have {code.index_bits} bits, got {y.size}")
    weights = (1 << np.arange(code.k, dtype=np.int64))
    alpha = int(y[: code.k] @ weights)
    z = int(y[code.k :] @ weights)
    return int(code_bits_at(x, np.array([alpha]), np.array([z]), code)[0])


def rs_hadamard_encode(x, code: CodeParams) -> np.ndarray:
    """Full nbar-bit codeword; index y = alpha + 2^k * z. Only sensible
    for small fields (nbar grows as 4^k)."""
    if code.nbar > 1 << 24:
        raise ValueError("refusing to materialize a codeword with more than 2^24 bits")
    coeffs = _message_coeffs(x, code)
    gf = GF2k(code.k)
    alphas = np.arange(1 << code.k, dtype=np.int64)
    syms = gf.poly_eval(coeffs, alphas)
    zs = np.arange(1 << code.k, dtype=np.int64)
    # out[z, alpha] = parity(popcount(sym(alpha) & z)); flatten with
    # alpha as the fast index to match y = alpha + 2^k * z.
    grid_syms = np.broadcast_to(syms, (1 << code.k, 1 << code.k))
    grid_zs = np.broadcast_to(zs[:, None], (1 << code.k, 1 << code.k))
    return _parity_of_and(grid_syms.ravel(), grid_zs.ravel())


# ---------------------------------------------------------------------------
# The composed extractor.

@dataclass
class ExtractorSpec:
    """A code plus a weak design with t = log2(nbar), defining an
    m_out-bit extractor with seed length d."""

    code: CodeParams
    design: WeakDesign

    def __post_init__(self):
        if self.design.t != self.code.index_bits:
            raise ValueError("design set size must equal the code index width")

    @property
    def m_out(self) -> int:
        return self.design.m

    @property
    def d(self) -> int:
        return self.design.d

    def to_json(self) -> str:
        return json.dumps(
            {"code": {"n": self.code.n, "k": self.code.k, "degree": self.code.degree},
             "design": self.design.to_json_obj()},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExtractorSpec":
        obj = json.loads(text)
        return cls(CodeParams(**obj["code"]), WeakDesign.from_json_obj(obj["design"]))


def choose_code_params(n: int, delta: Optional[float] = None) -> CodeParams:
    """Smallest field exponent whose Reed-Solomon degree fits n message
    bits; if a list-decoding radius delta is requested, also require
    distance_bound >= delta."""
    for k in range(2, 17):
        degree = max(0, math.ceil(n / k) - 1)
        if degree >= (1 << k):
            continue
        code = CodeParams(n=n, k=k, degree=degree)
        if delta is not None and code.distance_bound < delta:
            continue
        return code
    raise ValueError(f"no supported field fits n={n} message bits")


def build_extractor_spec(
    n: int,
    m_out: int,
    rng: Optional[np.random.Generator] = None,
    delta: Optional[float] = None,
    r_target: float = 2.0,
) -> ExtractorSpec:
    code = choose_code_params(n, delta)
    design = build_weak_design(code.index_bits, m_out, r_target, rng)
    return ExtractorSpec(code, design)


def trevisan_extract(x, seed, spec: ExtractorSpec) -> np.ndarray:
    """Output bit i is the codeword bit of x indexed by the seed
    restricted to design set i."""
    x = bits.as_bits(x)
    seed = bits.as_bits(seed)
    if seed.size != spec.d:
        raise ValueError(f"seed must have {spec.d} bits, got {seed.size}")
    k = spec.code.k
    weights = (1 << np.arange(k, dtype=np.int64))
    sel = np.stack([seed[s] for s in spec.design.sets])
    alphas = sel[:, :k] @ weights
    zs = sel[:, k:] @ weights
    return code_bits_at(x, alphas, zs, spec.code)
