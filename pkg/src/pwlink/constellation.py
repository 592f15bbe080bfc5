"""Gray-coded square QAM alphabets and bit/symbol (de)mapping.

The alphabet is normalized to unit average energy; launch power is applied
later as a scalar on the waveform.  Labels are integers 0..M-1 in
constellation-point order and are the common currency of all detectors.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, InternalError

SUPPORTED_ORDERS = (4, 16, 64)


def _gray_code(n_bits: int) -> np.ndarray:
    """Reflected Gray sequence of 2**n_bits integers."""
    codes = np.arange(2**n_bits)
    return codes ^ (codes >> 1)


@dataclass(frozen=True)
class Alphabet:
    """Square M-QAM constellation with per-axis Gray bit mapping.

    points[m] is the complex point carrying label m; bit_map[m] is the
    log2(M)-bit word assigned to it (I bits first, then Q bits).
    """

    order: int
    points: np.ndarray
    labels: np.ndarray
    bit_map: np.ndarray
    _bits_to_label: np.ndarray = field(repr=False, default=None)

    @property
    def bits_per_symbol(self) -> int:
        return self.bit_map.shape[1]

    @property
    def min_distance(self) -> float:
        """Smallest distance between two distinct constellation points."""
        diff = self.points[:, None] - self.points[None, :]
        d = np.abs(diff)
        return float(d[d > 0].min())


def build_qam(order: int) -> Alphabet:
    """Build a unit-energy Gray-mapped square QAM alphabet.

    Raises ConfigError for unsupported orders.
    """
    if order not in SUPPORTED_ORDERS:
        raise ConfigError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    bits_per_axis = side.bit_length() - 1

    levels = 2 * np.arange(side) - (side - 1)  # -3,-1,1,3 for side=4
    scale = 1.0 / np.sqrt(np.mean(levels**2) * 2.0)

    gray = _gray_code(bits_per_axis)
    points = np.empty(order, dtype=np.complex128)
    bit_map = np.zeros((order, 2 * bits_per_axis), dtype=np.uint8)
    for i in range(side):
        for q in range(side):
            m = i * side + q
            points[m] = (levels[i] + 1j * levels[q]) * scale
            word = (int(gray[i]) << bits_per_axis) | int(gray[q])
            for b in range(2 * bits_per_axis):
                bit_map[m, b] = (word >> (2 * bits_per_axis - 1 - b)) & 1

    weights = 1 << np.arange(2 * bits_per_axis)[::-1]
    bits_to_label = np.empty(order, dtype=np.int64)
    bits_to_label[bit_map @ weights] = np.arange(order)

    return Alphabet(
        order=order,
        points=points,
        labels=np.arange(order),
        bit_map=bit_map,
        _bits_to_label=bits_to_label,
    )


@dataclass
class SymbolBlock:
    """Dual-polarization symbol sequence with the labels that produced it."""

    symbols: np.ndarray  # (2, n) complex
    labels: np.ndarray  # (2, n) int
    role: str = "testing"  # "training" | "testing"

    def __post_init__(self):
        if self.symbols.shape != self.labels.shape or self.symbols.ndim != 2:
            raise InputError("symbols and labels must share shape (2, n)")

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[1]


def map_bits(bits: np.ndarray, alphabet: Alphabet) -> SymbolBlock:
    """Map a bit stream onto dual-polarization Gray-coded symbols.

    The first half of the stream fills polarization X, the second half Y.
    Stream length must be divisible by 2*log2(M).
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    k = alphabet.bits_per_symbol
    if bits.size == 0 or bits.size % (2 * k) != 0:
        raise InputError(f"bit stream length {bits.size} not divisible by {2 * k}")
    groups = bits.reshape(-1, k)
    weights = 1 << np.arange(k)[::-1]
    labels = alphabet._bits_to_label[groups @ weights]
    labels = labels.reshape(2, -1)
    return SymbolBlock(symbols=alphabet.points[labels], labels=labels)


def demap_symbols(labels: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    """Concatenate the bit words of a label sequence, in order."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= alphabet.order):
        raise InternalError("label out of range for alphabet")
    return alphabet.bit_map[labels.ravel()].ravel()
