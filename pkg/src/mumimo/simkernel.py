"""Monte-Carlo engine: per-packet channel draws, paired randomness across
algorithms, SNR sweeps, and the two headline experiments (uplink BER and
downlink sum-rate).

Randomness is derived entirely from (seed, packet, purpose, variant) paths,
and per-packet partial results are reduced in packet order, so the output is
a pure function of the experiment spec and is identical for any worker count.
"""

import concurrent.futures
import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import modem
from .channel import Link, Scenario, generate_channels
from .detectors import (
    DETECTOR_REGISTRY,
    linear_detect,
    ml_detect,
    mmse_filter,
    rmf_filter,
    sic_detect,
    zf_filter,
)
from .metrics import ResultTable, ber_row, count_bit_errors, noise_variance_for, rate_row, sum_rate
from .numerics import lq_decompose
from .precoders import (
    PRECODER_REGISTRY,
    PowerBudget,
    default_mmse_gamma,
    matrix_power_scale,
    mmse_precoder_matrix,
    rbd_precoder_matrix,
    zf_precoder_matrix,
)
from .streams import PURPOSES, RandomStream

VERSION = "0.1.0"

#: Reserved single-user baseline labels (K = 1, same array, same per-stream power).
UPLINK_BASELINE = "rmf_su"
DOWNLINK_BASELINE = "tmf_su"

# Variant indices distinguishing the multiuser draws from the K=1 baseline draws.
VARIANT_MULTIUSER = 0
VARIANT_SINGLE_USER = 1


class Experiment(enum.Enum):
    UPLINK_BER = "uplink_ber"
    DOWNLINK_SUMRATE = "downlink_sumrate"


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved description of one experiment run."""

    scenario: Scenario
    algorithms: tuple
    experiment: Experiment
    power_budget: PowerBudget
    sigma_s2: float = 1.0
    mmse_gamma: object = "auto"
    mmse_loading: str = "standard"
    sic_ordering: str = "sinr"
    vp_radius: int = 1
    vp_inner: str = "zf"
    rbd_alpha: object = "auto"
    rate_model: str = "per_user"
    include_single_user_baseline: bool = True

    def __post_init__(self):
        if self.experiment is Experiment.UPLINK_BER:
            registry, baseline = DETECTOR_REGISTRY, UPLINK_BASELINE
            expected_link = Link.UPLINK
        else:
            registry, baseline = PRECODER_REGISTRY, DOWNLINK_BASELINE
            expected_link = Link.DOWNLINK
        for name in self.algorithms:
            if name not in registry and name != baseline:
                raise ValueError(
                    f"unknown algorithm {name!r} for {self.experiment.value}; "
                    f"choose from {sorted(registry)} or {baseline!r}"
                )
        if self.scenario.link is not expected_link:
            raise ValueError(
                f"{self.experiment.value} requires a {expected_link.value} scenario"
            )
        if self.mmse_loading not in ("standard", "inverted"):
            raise ValueError(f"unknown mmse_loading {self.mmse_loading!r}")
        if self.sic_ordering not in ("sinr", "column_norm", "natural"):
            raise ValueError(f"unknown sic_ordering {self.sic_ordering!r}")
        if self.rate_model not in ("per_user", "joint"):
            raise ValueError(f"unknown rate_model {self.rate_model!r}")
        if self.vp_inner not in ("zf", "mmse", "tmf"):
            raise ValueError(f"unknown vp_inner {self.vp_inner!r}")

    def algorithm_labels(self):
        """Algorithms actually simulated, baseline appended when enabled."""
        labels = list(self.algorithms)
        baseline = (
            UPLINK_BASELINE
            if self.experiment is Experiment.UPLINK_BER
            else DOWNLINK_BASELINE
        )
        if self.include_single_user_baseline and baseline not in labels:
            labels.append(baseline)
        return tuple(labels)


@dataclass(frozen=True)
class StreamPlan:
    """Deterministic assignment of substream paths to (packet, purpose) pairs.

    The same plan serves every algorithm in a run, so all algorithms observe
    identical channels, symbols, and noise.
    """

    seed: int

    def stream_for(self, packet, purpose, variant=VARIANT_MULTIUSER):
        code = PURPOSES[purpose] if isinstance(purpose, str) else int(purpose)
        return RandomStream(self.seed).substream(packet, code, variant)


def paired_streams(spec):
    return StreamPlan(seed=spec.scenario.seed)


@dataclass
class RunResult:
    table: ResultTable
    metadata: dict = field(default_factory=dict)


def resolve_gamma(rule, n_streams, sigma_n2, p_total):
    """Loading factor: the documented auto rule or a fixed numeric value."""
    if rule == "auto":
        return default_mmse_gamma(n_streams, sigma_n2, p_total)
    return float(rule)


# ---------------------------------------------------------------------------
# Uplink BER experiment
# ---------------------------------------------------------------------------


def _uplink_detect(name, spec, h, r, sigma_n2):
    if name == "rmf":
        return linear_detect(rmf_filter(h), r)
    if name == "zf":
        return linear_detect(zf_filter(h), r)
    if name == "mmse":
        return linear_detect(
            mmse_filter(h, spec.sigma_s2, sigma_n2, loading=spec.mmse_loading), r
        )
    if name == "sic":
        return sic_detect(
            h, r, spec.sigma_s2, sigma_n2, ordering_rule=spec.sic_ordering
        )
    if name == "ml":
        out = np.empty((h.shape[1], r.shape[1]), dtype=np.complex128)
        for i in range(r.shape[1]):
            out[:, i] = ml_detect(r[:, i], h)
        return out
    raise ValueError(f"unknown detector {name!r}")


def _uplink_packet(spec, packet):
    """Simulate one packet at every SNR for every detector.

    Returns ``(partials, noise_energy, noise_count)`` where partials maps
    (algorithm, snr_db) to (bit errors, bit count).
    """
    plan = paired_streams(spec)
    sc = spec.scenario
    uses = sc.packet_len
    labels = spec.algorithm_labels()

    h = generate_channels(sc, plan.stream_for(packet, "channel")).composite
    bits = plan.stream_for(packet, "bits").generator().integers(
        0, 2, size=2 * sc.n_streams * uses
    )
    symbols = modem.modulate(bits).reshape(sc.n_streams, uses)
    unit_noise = plan.stream_for(packet, "noise").standard_complex((sc.n_a, uses))

    baseline = UPLINK_BASELINE in labels
    if baseline:
        sc1 = sc.single_user()
        h1 = generate_channels(
            sc1, plan.stream_for(packet, "channel", VARIANT_SINGLE_USER)
        ).composite
        bits1 = plan.stream_for(packet, "bits", VARIANT_SINGLE_USER).generator().integers(
            0, 2, size=2 * sc1.n_streams * uses
        )
        symbols1 = modem.modulate(bits1).reshape(sc1.n_streams, uses)
        unit_noise1 = plan.stream_for(packet, "noise", VARIANT_SINGLE_USER).standard_complex(
            (sc.n_a, uses)
        )

    partials = {}
    for snr_db in sc.snr_grid_db:
        sigma_n2 = noise_variance_for(snr_db, sc.n_t, spec.sigma_s2)
        r = h @ symbols + np.sqrt(sigma_n2) * unit_noise
        for name in labels:
            if name == UPLINK_BASELINE:
                continue
            s_hat = _uplink_detect(name, spec, h, r, sigma_n2)
            partials[(name, snr_db)] = count_bit_errors(
                bits, modem.demodulate(s_hat.reshape(-1))
            )
        if baseline:
            # The K=1 link has its own N_T in the SNR definition.
            sigma1 = noise_variance_for(snr_db, sc1.n_t, spec.sigma_s2)
            r1 = h1 @ symbols1 + np.sqrt(sigma1) * unit_noise1
            s_hat = linear_detect(rmf_filter(h1), r1)
            partials[(UPLINK_BASELINE, snr_db)] = count_bit_errors(
                bits1, modem.demodulate(s_hat.reshape(-1))
            )
    noise_energy = float(np.sum(np.abs(unit_noise) ** 2))
    return partials, noise_energy, unit_noise.size


def run_uplink_ber(spec, workers=1):
    return run_experiment(spec, workers=workers).table


# ---------------------------------------------------------------------------
# Downlink sum-rate experiment
# ---------------------------------------------------------------------------


def _per_user_rate(per_user_channels, p, sigma_n2, n_u):
    """Sum of per-user rates with other users' precoded streams as noise.

    Each term is a difference of the Eq.-style log-det functional evaluated
    on the user's own channel block with and without its own columns.
    """
    total = 0.0
    n_streams = p.shape[1]
    for k, hk in enumerate(per_user_channels):
        mask = np.ones(n_streams, dtype=bool)
        mask[k * n_u : (k + 1) * n_u] = False
        total += sum_rate(hk, p, sigma_n2) - sum_rate(hk, p[:, mask], sigma_n2)
    return total


def _downlink_rate(name, spec, chans, sigma_n2, budget):
    sc = spec.scenario
    h = chans.composite
    n_streams = sc.n_streams
    if name == "thp":
        # Effective linearized matrix beta*F = beta*Q^H; interference is
        # pre-subtracted by the feedback loop, so the modulo loss is the
        # only approximation and it is ignored here.
        _, q = lq_decompose(h)
        f = q.conj().T
        beta = np.sqrt(budget.p_total / (spec.sigma_s2 * n_streams))
        return sum_rate(h, beta * f, sigma_n2)
    if name == "tmf":
        w = h.conj().T
    elif name == "zf":
        w = zf_precoder_matrix(h)
    elif name == "mmse":
        gamma = resolve_gamma(spec.mmse_gamma, n_streams, sigma_n2, budget.p_total)
        w = mmse_precoder_matrix(h, gamma)
    elif name == "rbd":
        alpha = resolve_gamma(spec.rbd_alpha, n_streams, sigma_n2, budget.p_total)
        w = rbd_precoder_matrix(chans.per_user, alpha)
    elif name == "vp":
        # The perturbation does not change the linear map; the effective
        # matrix is the inner precoder.
        if spec.vp_inner == "zf":
            w = zf_precoder_matrix(h)
        elif spec.vp_inner == "mmse":
            gamma = resolve_gamma(spec.mmse_gamma, n_streams, sigma_n2, budget.p_total)
            w = mmse_precoder_matrix(h, gamma)
        else:
            w = h.conj().T
    else:
        raise ValueError(f"unknown precoder {name!r}")
    p = matrix_power_scale(w, budget, spec.sigma_s2) * w
    if spec.rate_model == "joint":
        return sum_rate(h, p, sigma_n2)
    return _per_user_rate(chans.per_user, p, sigma_n2, sc.n_u)


def _downlink_packet(spec, packet):
    """One channel draw: sum-rate of every precoder at every SNR."""
    plan = paired_streams(spec)
    sc = spec.scenario
    labels = spec.algorithm_labels()
    chans = generate_channels(sc, plan.stream_for(packet, "channel"))

    baseline = DOWNLINK_BASELINE in labels
    if baseline:
        sc1 = sc.single_user()
        chans1 = generate_channels(
            sc1, plan.stream_for(packet, "channel", VARIANT_SINGLE_USER)
        )
        budget1 = PowerBudget(spec.power_budget.p_total / sc.k_users)

    partials = {}
    for snr_db in sc.snr_grid_db:
        sigma_n2 = noise_variance_for(snr_db, sc.n_t, spec.sigma_s2)
        for name in labels:
            if name == DOWNLINK_BASELINE:
                continue
            partials[(name, snr_db)] = _downlink_rate(
                name, spec, chans, sigma_n2, spec.power_budget
            )
        if baseline:
            # Interference-free single-user reference at the multiuser
            # per-user power, scaled to the K users it stands in for.
            h1 = chans1.composite
            w1 = h1.conj().T
            p1 = matrix_power_scale(w1, budget1, spec.sigma_s2) * w1
            partials[(DOWNLINK_BASELINE, snr_db)] = sc.k_users * sum_rate(
                h1, p1, sigma_n2
            )
    return partials, 0.0, 0


def run_downlink_sumrate(spec, workers=1):
    return run_experiment(spec, workers=workers).table


# ---------------------------------------------------------------------------
# Shared driver
# ---------------------------------------------------------------------------


def _packet_range(spec, packets):
    fn = (
        _uplink_packet
        if spec.experiment is Experiment.UPLINK_BER
        else _downlink_packet
    )
    return [fn(spec, p) for p in packets]


def run_experiment(spec, workers=1):
    """Run the experiment and return the ResultTable plus run metadata."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    sc = spec.scenario
    labels = spec.algorithm_labels()
    start = time.time()

    packets = list(range(sc.n_packets))
    if workers == 1 or len(packets) <= 1:
        per_packet = _packet_range(spec, packets)
    else:
        chunks = [packets[i::workers] for i in range(workers)]
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            chunk_results = list(
                pool.map(_packet_range, [spec] * len(chunks), chunks)
            )
        # Reassemble in packet order so reduction order is worker-independent.
        per_packet = [None] * len(packets)
        for chunk, results in zip(chunks, chunk_results):
            for idx, res in zip(chunk, results):
                per_packet[idx] = res

    table = ResultTable()
    noise_energy = sum(r[1] for r in per_packet)
    noise_count = sum(r[2] for r in per_packet)
    for name in labels:
        for snr_db in sc.snr_grid_db:
            values = [r[0][(name, snr_db)] for r in per_packet]
            if spec.experiment is Experiment.UPLINK_BER:
                errors = sum(v[0] for v in values)
                bits = sum(v[1] for v in values)
                table.append(ber_row(name, snr_db, errors, bits, sc.n_packets))
            else:
                table.append(rate_row(name, snr_db, values))

    metadata = {
        "version": VERSION,
        "experiment": spec.experiment.value,
        "seed": sc.seed,
        "algorithms": list(labels),
        "n_t_convention": sc.n_t_convention.value,
        "wall_time_s": time.time() - start,
    }
    if spec.experiment is Experiment.UPLINK_BER and noise_count:
        unit_var = noise_energy / noise_count
        metadata["noise"] = {
            repr(float(snr)): {
                "configured_sigma_n2": noise_variance_for(snr, sc.n_t, spec.sigma_s2),
                "realized_sigma_n2": unit_var
                * noise_variance_for(snr, sc.n_t, spec.sigma_s2),
            }
            for snr in sc.snr_grid_db
        }
    return RunResult(table=table, metadata=metadata)
