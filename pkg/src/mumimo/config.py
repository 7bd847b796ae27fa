"""Run configuration: YAML document parsing, validation, and round-tripping.

A config is a flat YAML mapping.  Every key has a documented default except
``experiment``; unknown keys are rejected by name.  The fully resolved
configuration is echoed into the run metadata so any run can be reproduced
from its own metadata alone.
"""

import yaml

from .channel import Link, NtConvention, Scenario
from .precoders import PowerBudget
from .simkernel import Experiment, ExperimentSpec


class ConfigError(Exception):
    """A malformed or invalid run configuration."""


#: Default algorithm sets matching the two headline experiments.
DEFAULT_ALGORITHMS = {
    Experiment.UPLINK_BER: ("rmf", "mmse", "sic"),
    Experiment.DOWNLINK_SUMRATE: ("tmf", "mmse", "rbd", "thp"),
}

#: (default, description) for every recognized key; None means required
#: or derived at validation time.
CONFIG_KEYS = {
    "experiment": (None, "uplink_ber | downlink_sumrate (required)"),
    "n_a": (128, "transmit/receive array elements N_A"),
    "k": (8, "number of users K"),
    "n_u": (8, "antenna elements per user N_U"),
    "snr_db": ((0.0, 5.0, 10.0, 15.0), "SNR grid in dB"),
    "packet_len": (1000, "QPSK symbols per packet"),
    "n_packets": (None, "Monte-Carlo trials (default 1000 uplink, 100 downlink)"),
    "seed": (12345, "64-bit unsigned RNG seed"),
    "algorithms": (None, "algorithm names (defaults per experiment)"),
    "p_total": (None, "downlink power budget (default K*N_U*sigma_s2)"),
    "sigma_s2": (1.0, "symbol variance"),
    "mmse_gamma": ("auto", "MMSE precoder loading: auto = K*N_U*sigma_n2/p_total"),
    "mmse_loading": ("standard", "MMSE detector loading: standard | inverted"),
    "sic_ordering": ("sinr", "SIC detection order: sinr | column_norm | natural"),
    "vp_radius": (1, "vector perturbation search radius"),
    "vp_inner": ("zf", "vector perturbation inner precoder"),
    "rbd_alpha": ("auto", "RBD whitening regularization: auto or float"),
    "rate_model": ("per_user", "sum-rate composition: per_user | joint"),
    "include_single_user_baseline": (True, "append the K=1 baseline curve"),
    "n_t_convention": (
        "total_transmit_antennas",
        "N_T in the SNR definition (single implemented interpretation)",
    ),
    "workers": (1, "parallel packet workers"),
    "output_dir": (None, "output directory (default $MUMIMO_OUT or ./results)"),
    "formats": (("csv",), "result formats: csv and/or json"),
    "plotdata": (True, "emit plotdata/<algorithm>.dat xy series"),
    "figures": (True, "render figures/<experiment>.png"),
}

DEFAULT_N_PACKETS = {Experiment.UPLINK_BER: 1000, Experiment.DOWNLINK_SUMRATE: 100}


def parse_config_text(text):
    """Parse a YAML config document into (ExperimentSpec, output options)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a mapping, got {type(doc).__name__}")
    return parse_config(doc)


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def parse_config(doc):
    """Validate a config mapping and build the experiment spec.

    Returns ``(spec, options)`` where ``options`` holds workers and the
    output settings that do not affect the simulation itself.
    """
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    _require(not unknown, f"unknown config key {unknown[0]!r}" if unknown else "")

    merged = {k: v for k, (v, _) in CONFIG_KEYS.items()}
    merged.update(doc)

    _require(merged["experiment"] is not None, "missing required key 'experiment'")
    try:
        experiment = Experiment(str(merged["experiment"]))
    except ValueError:
        raise ConfigError(
            f"experiment must be one of "
            f"{[e.value for e in Experiment]}, got {merged['experiment']!r}"
        ) from None

    def as_int(key, minimum=None):
        v = merged[key]
        _require(
            isinstance(v, int) and not isinstance(v, bool),
            f"{key} must be an integer, got {v!r}",
        )
        if minimum is not None:
            _require(v >= minimum, f"{key} must be >= {minimum}, got {v}")
        return v

    n_a = as_int("n_a", 1)
    k = as_int("k", 1)
    n_u = as_int("n_u", 1)
    _require(
        n_a > k * n_u,
        f"scenario requires N_A > K N_U, got n_a={n_a}, k*n_u={k * n_u}",
    )
    packet_len = as_int("packet_len", 1)
    seed = as_int("seed", 0)
    workers = as_int("workers", 1)
    vp_radius = as_int("vp_radius", 0)

    n_packets = merged["n_packets"]
    if n_packets is None:
        n_packets = DEFAULT_N_PACKETS[experiment]
    else:
        _require(
            isinstance(n_packets, int) and n_packets >= 1,
            f"n_packets must be a positive integer, got {n_packets!r}",
        )

    snr_db = merged["snr_db"]
    _require(
        isinstance(snr_db, (list, tuple)) and len(snr_db) > 0,
        f"snr_db must be a non-empty list, got {snr_db!r}",
    )
    try:
        snr_db = tuple(float(s) for s in snr_db)
    except (TypeError, ValueError):
        raise ConfigError(f"snr_db entries must be numbers, got {merged['snr_db']!r}") from None

    sigma_s2 = float(merged["sigma_s2"])
    _require(sigma_s2 > 0, f"sigma_s2 must be positive, got {sigma_s2}")

    p_total = merged["p_total"]
    if p_total is None:
        p_total = k * n_u * sigma_s2
    p_total = float(p_total)
    _require(p_total > 0, f"p_total must be positive, got {p_total}")

    algorithms = merged["algorithms"]
    if algorithms is None:
        algorithms = DEFAULT_ALGORITHMS[experiment]
    _require(
        isinstance(algorithms, (list, tuple)) and algorithms,
        f"algorithms must be a non-empty list, got {algorithms!r}",
    )

    try:
        convention = NtConvention(str(merged["n_t_convention"]))
    except ValueError:
        raise ConfigError(
            f"n_t_convention must be 'total_transmit_antennas', "
            f"got {merged['n_t_convention']!r}"
        ) from None

    gamma = merged["mmse_gamma"]
    if gamma != "auto":
        try:
            gamma = float(gamma)
        except (TypeError, ValueError):
            raise ConfigError(f"mmse_gamma must be 'auto' or a number, got {gamma!r}") from None
        _require(gamma >= 0, f"mmse_gamma must be >= 0, got {gamma}")
    alpha = merged["rbd_alpha"]
    if alpha != "auto":
        try:
            alpha = float(alpha)
        except (TypeError, ValueError):
            raise ConfigError(f"rbd_alpha must be 'auto' or a number, got {alpha!r}") from None
        _require(alpha >= 0, f"rbd_alpha must be >= 0, got {alpha}")

    link = Link.UPLINK if experiment is Experiment.UPLINK_BER else Link.DOWNLINK
    scenario = Scenario(
        n_a=n_a,
        k_users=k,
        n_u=n_u,
        link=link,
        snr_grid_db=snr_db,
        packet_len=packet_len,
        n_packets=n_packets,
        seed=seed,
        n_t_convention=convention,
    )
    try:
        spec = ExperimentSpec(
            scenario=scenario,
            algorithms=tuple(str(a) for a in algorithms),
            experiment=experiment,
            power_budget=PowerBudget(p_total),
            sigma_s2=sigma_s2,
            mmse_gamma=gamma,
            mmse_loading=str(merged["mmse_loading"]),
            sic_ordering=str(merged["sic_ordering"]),
            vp_radius=vp_radius,
            vp_inner=str(merged["vp_inner"]),
            rbd_alpha=alpha,
            rate_model=str(merged["rate_model"]),
            include_single_user_baseline=bool(merged["include_single_user_baseline"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    formats = merged["formats"]
    _require(
        isinstance(formats, (list, tuple))
        and formats
        and all(f in ("csv", "json") for f in formats),
        f"formats must be a list drawn from ['csv', 'json'], got {formats!r}",
    )
    options = {
        "workers": workers,
        "output_dir": merged["output_dir"],
        "formats": tuple(formats),
        "plotdata": bool(merged["plotdata"]),
        "figures": bool(merged["figures"]),
    }
    return spec, options


def spec_to_config(spec, options):
    """The canonical config mapping reproducing (spec, options) exactly."""
    sc = spec.scenario
    return {
        "experiment": spec.experiment.value,
        "n_a": sc.n_a,
        "k": sc.k_users,
        "n_u": sc.n_u,
        "snr_db": list(sc.snr_grid_db),
        "packet_len": sc.packet_len,
        "n_packets": sc.n_packets,
        "seed": sc.seed,
        "algorithms": list(spec.algorithms),
        "p_total": spec.power_budget.p_total,
        "sigma_s2": spec.sigma_s2,
        "mmse_gamma": spec.mmse_gamma,
        "mmse_loading": spec.mmse_loading,
        "sic_ordering": spec.sic_ordering,
        "vp_radius": spec.vp_radius,
        "vp_inner": spec.vp_inner,
        "rbd_alpha": spec.rbd_alpha,
        "rate_model": spec.rate_model,
        "include_single_user_baseline": spec.include_single_user_baseline,
        "n_t_convention": sc.n_t_convention.value,
        "workers": options["workers"],
        "output_dir": options["output_dir"],
        "formats": list(options["formats"]),
        "plotdata": options["plotdata"],
        "figures": options["figures"],
    }
