"""Flat-fading channel generation and multiuser composite assembly.

Per-user channels are i.i.d. circularly-symmetric complex Gaussian with unit
total variance (1/2 per real component).  The composite channel stacks the
per-user blocks: row blocks on the downlink (K*N_U x N_A), column blocks on
the uplink (N_A x K*N_U).
"""

import enum
from dataclasses import dataclass, field

import numpy as np


class Link(enum.Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"


class NtConvention(enum.Enum):
    """Interpretation of the N_T factor in the SNR definition.

    Only the "total transmit antennas of the link" reading is implemented
    (downlink: N_A, uplink: K*N_U); the symbol is surfaced here rather than
    silently resolved.
    """

    TOTAL_TRANSMIT_ANTENNAS = "total_transmit_antennas"


@dataclass(frozen=True)
class Scenario:
    """Experiment geometry and Monte-Carlo bookkeeping."""

    n_a: int
    k_users: int
    n_u: int
    link: Link
    snr_grid_db: tuple = ()
    packet_len: int = 1000
    n_packets: int = 1
    seed: int = 12345
    n_t_convention: NtConvention = NtConvention.TOTAL_TRANSMIT_ANTENNAS

    def __post_init__(self):
        if self.n_a <= 0 or self.k_users <= 0 or self.n_u <= 0:
            raise ValueError("antenna and user counts must be positive")
        if self.n_a <= self.k_users * self.n_u:
            raise ValueError(
                f"N_A > K N_U required for an excess of degrees of freedom: "
                f"got N_A={self.n_a}, K*N_U={self.k_users * self.n_u}"
            )
        if self.packet_len < 1:
            raise ValueError("packet_len must be >= 1")
        if self.n_packets < 1:
            raise ValueError("n_packets must be >= 1")
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))

    @property
    def n_streams(self):
        return self.k_users * self.n_u

    @property
    def n_t(self):
        """Total transmit antennas of the link, used by the SNR definition."""
        if self.link is Link.DOWNLINK:
            return self.n_a
        return self.k_users * self.n_u

    def single_user(self):
        """The K=1 baseline scenario with the same array and per-user antennas."""
        return Scenario(
            n_a=self.n_a,
            k_users=1,
            n_u=self.n_u,
            link=self.link,
            snr_grid_db=self.snr_grid_db,
            packet_len=self.packet_len,
            n_packets=self.n_packets,
            seed=self.seed,
            n_t_convention=self.n_t_convention,
        )


@dataclass(frozen=True)
class ChannelSet:
    """Per-user channel matrices plus their stacked composite."""

    per_user: tuple
    composite: np.ndarray
    link: Link


def stack_composite(per_user, link):
    """Stack per-user blocks into the composite channel, user order preserved."""
    blocks = [np.asarray(h, dtype=np.complex128) for h in per_user]
    if not blocks:
        raise ValueError("per_user must not be empty")
    shape = blocks[0].shape
    if any(b.shape != shape for b in blocks):
        raise ValueError(
            f"inconsistent per-user block shapes: {[b.shape for b in blocks]}"
        )
    if link is Link.DOWNLINK:
        return np.vstack(blocks)
    return np.hstack(blocks)


def user_block(composite, k, n_u, link):
    """Extract user k's block from a composite channel."""
    if link is Link.DOWNLINK:
        return composite[k * n_u : (k + 1) * n_u, :]
    return composite[:, k * n_u : (k + 1) * n_u]


def generate_channels(sc, stream):
    """Draw one ChannelSet for the scenario from the given random stream.

    Each user's matrix comes from its own substream, so the draw is
    deterministic in (seed, path) and independent across users.
    """
    if sc.link is Link.DOWNLINK:
        shape = (sc.n_u, sc.n_a)
    else:
        shape = (sc.n_a, sc.n_u)
    per_user = tuple(
        stream.substream(k).standard_complex(shape) for k in range(sc.k_users)
    )
    return ChannelSet(
        per_user=per_user,
        composite=stack_composite(per_user, sc.link),
        link=sc.link,
    )
