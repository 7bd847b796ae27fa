"""SNR bookkeeping, bit-error accounting, and the sum-rate functional."""

import math
from dataclasses import dataclass

import numpy as np

from .numerics import as_cmatrix, logdet2_hpd


@dataclass(frozen=True)
class SnrPoint:
    """One operating point: SNR(dB) = 10 log10(n_t * sigma_s2 / sigma_n2)."""

    snr_db: float
    sigma_n2: float
    n_t: int
    sigma_s2: float = 1.0

    def __post_init__(self):
        if self.sigma_n2 <= 0 or self.sigma_s2 <= 0 or self.n_t < 1:
            raise ValueError("sigma_n2, sigma_s2 must be positive and n_t >= 1")
        implied = 10.0 * math.log10(self.n_t * self.sigma_s2 / self.sigma_n2)
        if not math.isclose(implied, self.snr_db, rel_tol=0, abs_tol=1e-9):
            raise ValueError(
                f"inconsistent SnrPoint: fields imply {implied} dB, got {self.snr_db} dB"
            )

    @classmethod
    def at(cls, snr_db, n_t, sigma_s2=1.0):
        return cls(
            snr_db=float(snr_db),
            sigma_n2=noise_variance_for(snr_db, n_t, sigma_s2),
            n_t=int(n_t),
            sigma_s2=float(sigma_s2),
        )


def noise_variance_for(snr_db, n_t, sigma_s2=1.0):
    """Noise variance realizing SNR(dB) = 10 log10(n_t * sigma_s2 / sigma_n2)."""
    if n_t < 1 or sigma_s2 <= 0:
        raise ValueError("n_t must be >= 1 and sigma_s2 positive")
    return n_t * sigma_s2 / (10.0 ** (float(snr_db) / 10.0))


def count_bit_errors(tx_bits, rx_bits):
    """Hamming distance and total length of two equal-length bit streams."""
    a = np.asarray(tx_bits).ravel()
    b = np.asarray(rx_bits).ravel()
    if a.size != b.size:
        raise ValueError(f"bit stream length mismatch: {a.size} vs {b.size}")
    return int(np.count_nonzero(a != b)), int(a.size)


def sum_rate(h_composite, p_precoder, sigma_n2):
    """Achievable rate log2 det(I + sigma_n^-2 H P P^H H^H) in bits/Hz.

    ``p_precoder`` must already include the power-normalization scale.
    """
    if sigma_n2 <= 0:
        raise ValueError(f"sigma_n2 must be positive, got {sigma_n2}")
    h = as_cmatrix(h_composite, "h_composite")
    p = as_cmatrix(p_precoder, "p_precoder")
    hp = h @ p
    m = np.eye(h.shape[0], dtype=np.complex128) + (hp @ hp.conj().T) / sigma_n2
    return logdet2_hpd(m)


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    snr_db: float
    metric: str
    value: float
    trials: int
    stderr: float

    def __post_init__(self):
        if self.metric not in ("ber", "sum_rate_bits"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "ber" and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"ber out of range: {self.value}")
        if self.metric == "sum_rate_bits" and self.value < 0.0:
            raise ValueError(f"sum rate must be nonnegative: {self.value}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


class ResultTable:
    """Ordered collection of per-(algorithm, SNR) metric rows."""

    CSV_HEADER = "algorithm,snr_db,metric,value,trials,stderr"

    def __init__(self, rows=()):
        self.rows = list(rows)

    def append(self, row):
        self.rows.append(row)

    def merge(self, other):
        """Concatenate another table's rows; merging is associative."""
        self.rows.extend(other.rows)
        return self

    def value_of(self, algorithm, snr_db, metric):
        for row in self.rows:
            if (
                row.algorithm == algorithm
                and row.metric == metric
                and math.isclose(row.snr_db, snr_db)
            ):
                return row
        raise KeyError(f"no row for ({algorithm}, {snr_db}, {metric})")

    def to_csv_lines(self):
        """CSV lines with shortest round-trip float formatting."""
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.algorithm},{r.snr_db!r},{r.metric},{r.value!r},{r.trials},{r.stderr!r}"
            )
        return lines

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        return isinstance(other, ResultTable) and self.rows == other.rows


def ber_row(algorithm, snr_db, errors, bits, packets):
    """Finalize a BER row; stderr from the pooled binomial approximation."""
    p = errors / bits if bits else 0.0
    stderr = math.sqrt(p * (1.0 - p) / bits) if bits else 0.0
    return ResultRow(
        algorithm=algorithm,
        snr_db=float(snr_db),
        metric="ber",
        value=p,
        trials=int(packets),
        stderr=stderr,
    )


def rate_row(algorithm, snr_db, values):
    """Finalize a sum-rate row; stderr is the sample standard error."""
    v = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(v))
    stderr = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return ResultRow(
        algorithm=algorithm,
        snr_db=float(snr_db),
        metric="sum_rate_bits",
        value=mean,
        trials=int(v.size),
        stderr=stderr,
    )
