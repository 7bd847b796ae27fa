"""QPSK bit/symbol mapping, the hard slicer, and the lattice modulo operator."""

from dataclasses import dataclass, field

import numpy as np

_SCALE = 1.0 / np.sqrt(2.0)

#: Modulo period per real dimension.  Per-dimension symbol values are
#: +-1/sqrt(2) with spacing sqrt(2), so the periodically extended decision
#: region has width 2*sqrt(2).
TAU = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class Constellation:
    """Unit-energy Gray-mapped QPSK.

    Point order follows the bit pair (b0, b1) read as an integer: b0 sets
    the sign of the real part, b1 the sign of the imaginary part, with a
    0 bit mapping to +.
    """

    points: np.ndarray = field(
        default_factory=lambda: np.array(
            [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=np.complex128
        )
        * _SCALE
    )
    bits_per_symbol: int = 2
    sigma_s2: float = 1.0
    tau: float = TAU


QPSK = Constellation()


def modulate(bits):
    """Map a bit sequence (even length) to unit-energy QPSK symbols."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size % 2 != 0:
        raise ValueError(f"bit count must be even, got {b.size}")
    re = 1.0 - 2.0 * b[0::2]
    im = 1.0 - 2.0 * b[1::2]
    return (re + 1j * im) * _SCALE


def hard_slice(values):
    """Nearest-constellation-point decision, applied elementwise.

    Components that fall exactly on a decision boundary resolve to the
    positive point, so the slicer is deterministic.
    """
    v = np.asarray(values, dtype=np.complex128)
    re = np.where(v.real < 0.0, -1.0, 1.0)
    im = np.where(v.imag < 0.0, -1.0, 1.0)
    return (re + 1j * im) * _SCALE


def demodulate(symbols):
    """Invert :func:`modulate` for sliced symbols.

    Raises ``ValueError`` if any input is not a constellation point; the
    caller must slice soft values first.
    """
    s = np.asarray(symbols, dtype=np.complex128).ravel()
    if s.size and np.max(np.abs(s - hard_slice(s))) > 1e-9:
        raise ValueError("demodulate expects constellation points; slice first")
    bits = np.empty(2 * s.size, dtype=np.int64)
    bits[0::2] = (s.real < 0.0).astype(np.int64)
    bits[1::2] = (s.imag < 0.0).astype(np.int64)
    return bits


def lattice_modulo(values, tau=TAU):
    """Wrap real and imaginary parts independently into [-tau/2, tau/2)."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    v = np.asarray(values, dtype=np.complex128)
    re = v.real - tau * np.floor(v.real / tau + 0.5)
    im = v.imag - tau * np.floor(v.imag / tau + 0.5)
    return re + 1j * im
