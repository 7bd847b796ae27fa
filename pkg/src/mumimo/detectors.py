"""Uplink receive processing: exhaustive ML, linear RMF/ZF/MMSE filters,
and decision-feedback / successive interference cancellation.

Receive filters are N_A x (K*N_U) matrices applied as ``Q(W^H r)``.  The
MMSE loading is implemented as ``sigma_n^2/sigma_s^2`` (the standard
receive-filter regularization); ``loading="inverted"`` switches to the
inverted ratio for comparison.  The ZF filter uses the pseudo-inverse form
``H (H^H H)^-1``, which is well defined for tall uplink channels.
"""

from dataclasses import dataclass

import numpy as np

from . import modem
from .numerics import as_cmatrix, solve_hpd

ML_CANDIDATE_CAP = 2**20
_ML_CHUNK = 1 << 14


@dataclass(frozen=True)
class ReceiveFilterSet:
    """Feedforward filter plus optional feedback matrix and detection order.

    ``f``, when present, is strictly lower triangular in the detection
    order: stream l feeds back only on streams detected before it.
    """

    w: np.ndarray
    f: np.ndarray = None
    ordering: tuple = None


def rmf_filter(h):
    """Receive matched filter W = H."""
    return ReceiveFilterSet(w=as_cmatrix(h, "h"))


def mmse_filter(h, sigma_s2, sigma_n2, loading="standard"):
    """MMSE receive filter (H H^H + (sigma_n^2/sigma_s^2) I)^-1 H."""
    h = as_cmatrix(h, "h")
    if sigma_n2 <= 0 or sigma_s2 <= 0:
        raise ValueError("sigma_s2 and sigma_n2 must be positive")
    if loading == "standard":
        reg = sigma_n2 / sigma_s2
    elif loading == "inverted":
        reg = sigma_s2 / sigma_n2
    else:
        raise ValueError(f"unknown loading {loading!r}")
    gram = h @ h.conj().T + reg * np.eye(h.shape[0], dtype=np.complex128)
    return ReceiveFilterSet(w=solve_hpd(gram, h))


def zf_filter(h):
    """Zero-forcing receive filter H (H^H H)^-1, so W^H H = I."""
    h = as_cmatrix(h, "h")
    gram = h.conj().T @ h
    return ReceiveFilterSet(w=solve_hpd(gram, h.conj().T).conj().T)


def linear_detect(filters, r):
    """Slice the filtered observation per stream: Q(W^H r)."""
    r = np.asarray(r, dtype=np.complex128)
    return modem.hard_slice(filters.w.conj().T @ r)


def ml_detect(r, h, constellation=modem.QPSK):
    """Exhaustive maximum-likelihood detection.

    Minimizes ``||r - H s||^2`` over every symbol vector; ties break in
    enumeration order, which is lexicographic in the fixed constellation
    point order with the first stream most significant.  The search is
    refused above :data:`ML_CANDIDATE_CAP` candidates.
    """
    h = as_cmatrix(h, "h")
    r = np.asarray(r, dtype=np.complex128).ravel()
    n_streams = h.shape[1]
    points = constellation.points
    n_candidates = len(points) ** n_streams
    if n_candidates > ML_CANDIDATE_CAP:
        raise ValueError(
            f"ML search space {n_candidates} exceeds cap {ML_CANDIDATE_CAP}"
        )
    best_obj = np.inf
    best_idx = None
    digits = len(points)
    for start in range(0, n_candidates, _ML_CHUNK):
        idx = np.arange(start, min(start + _ML_CHUNK, n_candidates))
        # Decode candidate indices into per-stream constellation indices,
        # first stream most significant.
        codes = (idx[:, None] // digits ** np.arange(n_streams - 1, -1, -1)) % digits
        cand = points[codes]  # (chunk, n_streams)
        resid = r[None, :] - cand @ h.T
        obj = np.sum(np.abs(resid) ** 2, axis=1)
        local = int(np.argmin(obj))
        if obj[local] < best_obj:
            best_obj = float(obj[local])
            best_idx = int(idx[local])
    codes = (best_idx // digits ** np.arange(n_streams - 1, -1, -1)) % digits
    return points[codes]


def _mmse_columns(h, reg):
    """MMSE filter via the Gram form H (H^H H + reg I)^-1 (push-through)."""
    gram = h.conj().T @ h + reg * np.eye(h.shape[1], dtype=np.complex128)
    inv = solve_hpd(gram, np.eye(h.shape[1], dtype=np.complex128))
    return h @ inv, inv


def sic_detect(h, r, sigma_s2, sigma_n2, ordering_rule="sinr", deflate=True):
    """Successive interference cancellation with per-stage MMSE filtering.

    Streams are detected one at a time; each decided symbol's channel
    column is subtracted from the observation and the MMSE filter is
    recomputed on the deflated channel.  ``deflate=False`` gives the
    one-shot decision-feedback variant with precomputed filters.

    Ordering rules: "sinr" (descending post-MMSE SINR, the VBLAST
    convention), "column_norm" (descending deflated channel column norm),
    or "natural".
    """
    h = as_cmatrix(h, "h")
    r = np.asarray(r, dtype=np.complex128)
    single_use = r.ndim == 1
    r2 = r[:, None] if single_use else r
    if ordering_rule not in ("sinr", "column_norm", "natural"):
        raise ValueError(f"unknown ordering rule {ordering_rule!r}")
    reg = sigma_n2 / sigma_s2
    if deflate:
        s_hat = _sic_deflating(h, r2, reg, ordering_rule)
    else:
        filters = single_pass_df_filters(h, sigma_s2, sigma_n2, ordering_rule)
        s_hat = df_detect(filters, r2)
    return s_hat[:, 0] if single_use else s_hat


def _sic_deflating(h, r, reg, ordering_rule):
    n_streams = h.shape[1]
    remaining = list(range(n_streams))
    h_d = h.copy()
    residual = r.copy()
    s_hat = np.empty((n_streams, r.shape[1]), dtype=np.complex128)
    for _ in range(n_streams):
        w_d, gram_inv = _mmse_columns(h_d, reg)
        if ordering_rule == "sinr":
            # Post-MMSE SINR is monotone in 1/diag((H^H H + reg I)^-1).
            j = int(np.argmin(np.real(np.diagonal(gram_inv))))
        elif ordering_rule == "column_norm":
            j = int(np.argmax(np.sum(np.abs(h_d) ** 2, axis=0)))
        else:
            j = 0
        z = w_d[:, j].conj() @ residual
        decided = modem.hard_slice(z)
        s_hat[remaining[j]] = decided
        residual = residual - np.outer(h_d[:, j], decided)
        h_d = np.delete(h_d, j, axis=1)
        remaining.pop(j)
    return s_hat


def single_pass_df_filters(h, sigma_s2, sigma_n2, ordering_rule="sinr"):
    """Feedforward/feedback matrices for the one-shot DF variant.

    ``f`` holds, in the detection order, the entries of ``W^H H`` that
    couple each stream to the streams decided before it (strictly lower
    triangular in that order).
    """
    h = as_cmatrix(h, "h")
    filters = mmse_filter(h, sigma_s2, sigma_n2)
    coupling = filters.w.conj().T @ h
    n_streams = h.shape[1]
    if ordering_rule == "natural":
        order = tuple(range(n_streams))
    elif ordering_rule == "column_norm":
        norms = np.sum(np.abs(h) ** 2, axis=0)
        order = tuple(int(i) for i in np.argsort(-norms, kind="stable"))
    elif ordering_rule == "sinr":
        gram = h.conj().T @ h + (sigma_n2 / sigma_s2) * np.eye(
            n_streams, dtype=np.complex128
        )
        inv = solve_hpd(gram, np.eye(n_streams, dtype=np.complex128))
        order = tuple(int(i) for i in np.argsort(np.real(np.diagonal(inv)), kind="stable"))
    else:
        raise ValueError(f"unknown ordering rule {ordering_rule!r}")
    perm = np.asarray(order)
    f = np.tril(coupling[np.ix_(perm, perm)], k=-1)
    return ReceiveFilterSet(w=filters.w, f=f, ordering=order)


def df_detect(filters, r):
    """One-shot decision feedback: Q(W^H r - F s_o) in the stored order."""
    r = np.asarray(r, dtype=np.complex128)
    soft = filters.w.conj().T @ r
    s_o = modem.hard_slice(soft)
    perm = np.asarray(filters.ordering)
    corrected = modem.hard_slice(soft[perm] - filters.f @ s_o[perm])
    s_hat = np.empty_like(corrected)
    s_hat[perm] = corrected
    return s_hat


#: Registered detector names with their option keys and defaults.
DETECTOR_REGISTRY = {
    "ml": {"options": {"cap": str(ML_CANDIDATE_CAP)}},
    "rmf": {"options": {}},
    "zf": {"options": {}},
    "mmse": {"options": {"mmse_loading": "standard|inverted"}},
    "sic": {"options": {"sic_ordering": "sinr|column_norm|natural"}},
}
