"""Symbol/bit error counting and BER-derived Q-factor."""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcinv

from .constellation import Alphabet
from .errors import InputError

Q_FLOOR_DB = -30.0


@dataclass
class ErrorReport:
    n_symbols: int
    n_symbol_errors: int
    n_bits: int
    n_bit_errors: int
    ser: float
    ber: float
    q_factor_db: float = float("nan")


def count_errors(detected, true, alphabet: Alphabet) -> ErrorReport:
    """Count symbol and bit errors between detected and true label sequences.

    Bit errors use the alphabet's Gray bit map, so a confusion between two
    grid-adjacent points costs exactly one bit.  The Q-factor field is left
    unset; fill it with q_from_ber.
    """
    detected = np.asarray(detected).ravel()
    true = np.asarray(true).ravel()
    if detected.size != true.size or detected.size == 0:
        raise InputError("detected and true label sequences must have equal nonzero length")
    k = alphabet.bits_per_symbol
    sym_err = int(np.sum(detected != true))
    bit_err = int(np.sum(alphabet.bit_map[detected] != alphabet.bit_map[true]))
    n = detected.size
    return ErrorReport(
        n_symbols=n,
        n_symbol_errors=sym_err,
        n_bits=n * k,
        n_bit_errors=bit_err,
        ser=sym_err / n,
        ber=bit_err / (n * k),
    )


def q_from_ber(ber: float, n_bits: int | None = None) -> float:
    """Q-factor in dB from a bit error rate: 20*log10(sqrt(2)*erfcinv(2*ber)).

    A BER of exactly zero is clamped to 1/(2*n_bits) so finite Monte Carlo
    runs stay finite and order-preserving; values at or below the erfcinv
    breakdown are floored at -30 dB.
    """
    if ber < 0.0 or ber > 0.5:
        raise InputError(f"ber {ber} outside [0, 0.5]")
    if ber == 0.0:
        if n_bits is None or n_bits <= 0:
            raise InputError("ber == 0 needs n_bits for the zero-error clamp")
        ber = 1.0 / (2.0 * n_bits)
    arg = np.sqrt(2.0) * erfcinv(2.0 * ber)
    if arg <= 0.0:
        return Q_FLOOR_DB
    return max(float(20.0 * np.log10(arg)), Q_FLOOR_DB)


def finalize_report(report: ErrorReport) -> ErrorReport:
    """Fill in the Q-factor consistent with the report's BER."""
    report.q_factor_db = q_from_ber(report.ber, report.n_bits)
    return report
