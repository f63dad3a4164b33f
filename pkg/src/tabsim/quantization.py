"""Sign + 12-bit magnitude output weights and the binary current splitter.

A code is 13 bits: bit 13 (MSB) is the sign, ``1`` meaning negative, and
magnitude bit ``k`` (k = 1 is the most significant) switches in the branch
carrying ``I/2**k``.  Hex strings are four digits, ``0000`` to ``1FFF``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "MAG_BITS",
    "FULL_SCALE",
    "WeightCode",
    "SplitterMismatch",
    "encode",
    "decode",
    "splitter_transfer",
    "quantize_weights",
    "effective_weights",
]

MAG_BITS = 12
FULL_SCALE = 1.0 - 2.0**-MAG_BITS


@dataclass(frozen=True, order=True)
class WeightCode:
    sign: int
    magnitude: int

    def __post_init__(self):
        if self.sign not in (0, 1):
            raise DomainError(f"sign bit must be 0 or 1, got {self.sign}")
        if not 0 <= self.magnitude < 2**MAG_BITS:
            raise DomainError(f"magnitude {self.magnitude} does not fit in {MAG_BITS} bits")

    @property
    def bits(self):
        """Magnitude bits, most significant (the ``I/2`` branch) first."""
        return tuple((self.magnitude >> (MAG_BITS - k)) & 1 for k in range(1, MAG_BITS + 1))

    @property
    def raw(self):
        return (self.sign << MAG_BITS) | self.magnitude

    def to_hex(self):
        return f"{self.raw:04X}"

    @classmethod
    def from_raw(cls, raw):
        if not 0 <= raw <= 0x1FFF:
            raise DomainError(f"code {raw:#x} exceeds 13 bits")
        return cls(raw >> MAG_BITS, raw & (2**MAG_BITS - 1))

    @classmethod
    def from_hex(cls, text):
        text = text.strip()
        if not text or len(text) > 4 or any(ch not in "0123456789abcdefABCDEF" for ch in text):
            raise DomainError(f"not a 4-digit hex code: {text!r}")
        return cls.from_raw(int(text, 16))


def _round_half_away(x):
    # x >= 0; floor plus an exact fractional test avoids the x + 0.5 rounding trap
    q = np.floor(x)
    return q + (x - q >= 0.5)


def _magnitude_steps(w, depth):
    a = np.abs(np.asarray(w, dtype=float))
    if depth == 0:
        return np.zeros(a.shape, dtype=np.int64)
    steps = _round_half_away(np.minimum(a, FULL_SCALE) * 2.0**depth)
    return np.minimum(steps, 2**depth - 1).astype(np.int64)


def encode(w, depth=MAG_BITS):
    """Nearest code to ``w``, rounding half away from zero.

    ``depth`` < 12 rounds onto the coarser ``2**-depth`` grid and leaves the
    lower magnitude bits at zero.
    """
    if not np.isfinite(w):
        raise DomainError(f"cannot encode non-finite weight {w}")
    if not 0 <= depth <= MAG_BITS:
        raise DomainError(f"magnitude depth must be in [0, {MAG_BITS}], got {depth}")
    mag = int(_magnitude_steps(w, depth)) << (MAG_BITS - depth)
    return WeightCode(int(w < 0), mag)


def decode(c):
    value = c.magnitude / 2.0**MAG_BITS
    return -value if c.sign else value


@dataclass(frozen=True)
class SplitterMismatch:
    """Per-stage deviations of the pass-through ratio from 1/2."""

    deltas: tuple
    seed: int = None

    def __post_init__(self):
        if len(self.deltas) != MAG_BITS:
            raise DomainError(f"need {MAG_BITS} stage deviations, got {len(self.deltas)}")
        if any(not abs(d) < 0.5 for d in self.deltas):
            raise DomainError("stage ratios must stay inside (0, 1)")

    @classmethod
    def ideal(cls):
        return cls((0.0,) * MAG_BITS)

    @classmethod
    def sample(cls, seed, sigma=0.01, limit=0.4):
        rng = np.random.default_rng(seed)
        d = np.clip(rng.normal(0.0, sigma, MAG_BITS), -limit, limit)
        return cls(tuple(float(x) for x in d), seed)


def splitter_transfer(i_in, c, mm=None):
    """Split ``i_in`` through the ladder.

    Returns ``(i_good, i_dump, route)`` with route ``"outN"`` for a negative
    code.  Stage ``k`` passes ``1/2 + delta_k`` of its input on and taps the
    rest; tapped currents of switched-on bits sum into ``i_good``, everything
    else (including the terminator) is dumped.
    """
    if not (np.isfinite(i_in) and i_in >= 0):
        raise DomainError(f"input current must be finite and >= 0, got {i_in}")
    route = "outN" if c.sign else "outP"
    if mm is None:
        i_good = i_in * (c.magnitude / 2.0**MAG_BITS)
        return i_good, i_in - i_good, route
    i_good = 0.0
    i_dump = 0.0
    remaining = i_in
    for bit, delta in zip(c.bits, mm.deltas):
        tap = remaining * (0.5 - delta)
        remaining = remaining - tap
        if bit:
            i_good += tap
        else:
            i_dump += tap
    return i_good, i_dump + remaining, route


def quantize_weights(w, depth=MAG_BITS):
    """Encode every weight at ``depth`` magnitude bits.

    Returns ``(codes, reals)`` where ``reals`` are the decoded values.
    """
    values = w.values if hasattr(w, "values") else np.asarray(w, dtype=float)
    codes = [encode(float(v), depth) for v in values]
    return codes, np.array([decode(c) for c in codes])


def effective_weights(codes, mismatches=None):
    """Signed gain each neuron's splitter actually applies (decode when ideal)."""
    if mismatches is None:
        return np.array([decode(c) for c in codes])
    out = np.empty(len(codes))
    for j, (c, mm) in enumerate(zip(codes, mismatches)):
        good, _, route = splitter_transfer(1.0, c, mm)
        out[j] = -good if route == "outN" else good
    return out
