"""Downlink transmit processing: TMF, linear ZF/MMSE, THP, vector
perturbation, and regularized block diagonalization, plus the shared
power-normalization contract.

All precoders return a :class:`PrecoderOutput` whose transmit vector is
scaled to the power budget; the receiver-side compensation ``1/beta`` is
exposed to the simulation kernel.
"""

from dataclasses import dataclass, field

import numpy as np

from . import modem
from .numerics import as_cmatrix, lq_decompose, solve_hpd, svd

VP_CANDIDATE_CAP = 10**6


@dataclass(frozen=True)
class PowerBudget:
    """Total transmit power per channel use."""

    p_total: float

    def __post_init__(self):
        if not np.isfinite(self.p_total) or self.p_total <= 0:
            raise ValueError(f"p_total must be positive and finite, got {self.p_total}")


@dataclass(frozen=True)
class PrecoderOutput:
    """Normalized transmit vector with its scale and algorithm side data."""

    x: np.ndarray
    beta: float
    aux: dict = field(default_factory=dict)


def normalize_power(x_unnormalized, budget):
    """Scale a transmit vector to the instantaneous power budget.

    Returns ``(x, beta)`` with ``x = beta * x_unnormalized`` and
    ``||x||^2 = p_total`` (zero input passes through with beta = 1).
    """
    x = np.asarray(x_unnormalized, dtype=np.complex128)
    energy = float(np.vdot(x, x).real)
    if energy == 0.0:
        return x, 1.0
    beta = float(np.sqrt(budget.p_total / energy))
    return beta * x, beta


def matrix_power_scale(w, budget, sigma_s2=1.0):
    """Expected-energy scale for a fixed precoding matrix.

    With i.i.d. symbols of variance ``sigma_s2``, E||W s||^2 =
    sigma_s2 * ||W||_F^2; the returned beta puts beta*W on the budget.
    """
    w = as_cmatrix(w, "w")
    energy = sigma_s2 * float(np.linalg.norm(w, ord="fro") ** 2)
    if energy == 0.0:
        return 1.0
    return float(np.sqrt(budget.p_total / energy))


def default_mmse_gamma(n_streams, sigma_n2, p_total):
    """Standard regularized channel-inversion loading K*N_U*sigma_n^2/P."""
    return n_streams * sigma_n2 / p_total


def tmf_precode(h, s, budget):
    """Transmit matched filter: apply the conjugate channel to the symbols."""
    h = as_cmatrix(h, "h")
    s = np.asarray(s, dtype=np.complex128).ravel()
    x, beta = normalize_power(h.conj().T @ s, budget)
    return PrecoderOutput(x=x, beta=beta)


def zf_precoder_matrix(h):
    """Zero-forcing precoder H^H (H H^H)^-1 for a full-row-rank channel."""
    h = as_cmatrix(h, "h")
    gram = h @ h.conj().T
    return solve_hpd(gram, h).conj().T


def mmse_precoder_matrix(h, gamma):
    """Regularized channel inversion H^H (H H^H + gamma I)^-1."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    h = as_cmatrix(h, "h")
    gram = h @ h.conj().T + gamma * np.eye(h.shape[0], dtype=np.complex128)
    return solve_hpd(gram, h).conj().T


def linear_precode(w, s, budget):
    """Apply a linear precoding matrix and normalize to the budget."""
    w = as_cmatrix(w, "w")
    s = np.asarray(s, dtype=np.complex128).ravel()
    x, beta = normalize_power(w @ s, budget)
    return PrecoderOutput(x=x, beta=beta)


def thp_precode(h, s, budget):
    """Tomlinson-Harashima precoding via the LQ decomposition of the channel.

    With ``h = L Q``, the feedforward matrix is ``F = Q^H`` and the
    unit-diagonal feedback matrix is ``B = diag(L)^-1 L``.  The precoded
    symbols are computed sequentially with the modulo operator, so stream l
    sees only already-computed streams.  The receiver divides stream l by
    ``beta * L[l, l]``, applies the modulo, and slices.
    """
    h = as_cmatrix(h, "h")
    s = np.asarray(s, dtype=np.complex128).ravel()
    n = h.shape[0]
    l, q = lq_decompose(h)
    gains = np.real(np.diagonal(l)).copy()
    b = l / gains[:, None]
    xt = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        xt[i] = modem.lattice_modulo(s[i] - b[i, :i] @ xt[:i])
    x, beta = normalize_power(q.conj().T @ xt, budget)
    return PrecoderOutput(x=x, beta=beta, aux={"gains": gains, "feedback": b})


def thp_receive(y, gains, beta, tau=modem.TAU):
    """Per-stream THP receiver: scale by 1/(beta*gain), modulo, slice."""
    y = np.asarray(y, dtype=np.complex128)
    scaled = y / (beta * np.asarray(gains).reshape(-1, *([1] * (y.ndim - 1))))
    return modem.hard_slice(modem.lattice_modulo(scaled, tau))


def _vp_offsets(n_streams, radius):
    """All complex integer offsets with re/im in {-radius..radius}^n."""
    n_candidates = (2 * radius + 1) ** (2 * n_streams)
    if n_candidates > VP_CANDIDATE_CAP:
        raise ValueError(
            f"vector perturbation search space {n_candidates} exceeds cap "
            f"{VP_CANDIDATE_CAP}; reduce the radius or the number of streams"
        )
    values = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([values] * (2 * n_streams)), indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=1).astype(np.float64)
    return flat[:, :n_streams] + 1j * flat[:, n_streams:]


def vp_precode(h, s, w=None, tau=modem.TAU, radius=1, budget=None):
    """Vector perturbation: lattice-offset the symbols to minimize transmit power.

    Searches exhaustively over complex integer offsets with components in
    {-radius..radius} and picks ``p`` minimizing ``||W (s + tau p)||^2``;
    ``w`` defaults to the zero-forcing precoder of ``h``.
    """
    h = as_cmatrix(h, "h")
    if w is None:
        w = zf_precoder_matrix(h)
    w = as_cmatrix(w, "w")
    s = np.asarray(s, dtype=np.complex128).ravel()
    if budget is None:
        budget = PowerBudget(float(s.size))
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    offsets = _vp_offsets(s.size, radius)
    # ||W s + tau W p||^2 for all candidates at once.
    base = (w @ s)[:, None]
    candidates = base + tau * (w @ offsets.T)
    objectives = np.sum(np.abs(candidates) ** 2, axis=0)
    best = int(np.argmin(objectives))
    p = offsets[best]
    x, beta = normalize_power(w @ (s + tau * p), budget)
    return PrecoderOutput(
        x=x, beta=beta, aux={"p": p, "objective": float(objectives[best])}
    )


def rbd_precoder_matrix(per_user, alpha, second_stage_gamma=None):
    """Regularized block diagonalization for K >= 2 users.

    Stage one whitens each user's view of the other users' stacked channel:
    ``M_k = Vbar_k (Sbar_k^T Sbar_k + alpha I)^-1/2`` over the full right
    singular basis of the others' channel.  With ``alpha = 0`` this reduces
    to the exact null-space projection, so inter-user interference vanishes.
    Stage two applies a per-user MMSE precoder to the effective channel
    ``H_k M_k`` (loading ``second_stage_gamma``, default ``alpha``).
    """
    blocks = [as_cmatrix(hk, f"per_user[{k}]") for k, hk in enumerate(per_user)]
    if len(blocks) < 2:
        raise ValueError("rbd_precoder_matrix requires K >= 2 users")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    gamma2 = alpha if second_stage_gamma is None else second_stage_gamma
    n_a = blocks[0].shape[1]
    columns = []
    for k, hk in enumerate(blocks):
        others = np.vstack([b for j, b in enumerate(blocks) if j != k])
        _, sv, vh = svd(others, full_basis=True)
        s2 = np.zeros(n_a)
        s2[: sv.size] = sv**2
        if alpha == 0.0:
            # Null-space (block diagonalization) limit of the whitening weights.
            tol = max(sv.max(initial=0.0), 1.0) * 1e-12
            weights = np.where(np.sqrt(s2) <= tol, 1.0, 0.0)
        else:
            weights = 1.0 / np.sqrt(s2 + alpha)
        mk = vh.conj().T * weights[None, :]
        heff = hk @ mk
        ak = mmse_precoder_matrix(heff, gamma2)
        columns.append(mk @ ak)
    return np.hstack(columns)


#: Registered precoder names with their option keys and defaults.
PRECODER_REGISTRY = {
    "tmf": {"options": {}},
    "zf": {"options": {}},
    "mmse": {"options": {"mmse_gamma": "auto (K*N_U*sigma_n^2/p_total) or float"}},
    "thp": {"options": {}},
    "vp": {"options": {"vp_radius": "1", "vp_inner": "zf|mmse|tmf"}},
    "rbd": {"options": {"rbd_alpha": "auto (K*N_U*sigma_n^2/p_total) or float"}},
}
