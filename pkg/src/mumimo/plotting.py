"""Figure rendering for experiment results (headless matplotlib)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_MARKERS = ["o", "s", "^", "v", "D", "x", "+", "*"]


def series_by_algorithm(table):
    """Group a ResultTable into {algorithm: (snr list, value list)}."""
    series = {}
    for row in table.rows:
        xs, ys = series.setdefault(row.algorithm, ([], []))
        xs.append(row.snr_db)
        ys.append(row.value)
    return series


def render_figure(table, experiment, path):
    """Render the BER or sum-rate comparison figure to ``path``."""
    series = series_by_algorithm(table)
    fig, ax = plt.subplots(figsize=(7, 5))
    ber = experiment == "uplink_ber"
    for i, (name, (xs, ys)) in enumerate(series.items()):
        marker = _MARKERS[i % len(_MARKERS)]
        if ber:
            ax.semilogy(xs, ys, marker=marker, label=name)
        else:
            ax.plot(xs, ys, marker=marker, label=name)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER" if ber else "Sum rate (bits/Hz)")
    ax.set_title(
        "Uplink detection BER" if ber else "Downlink precoding sum rate"
    )
    ax.grid(True, which="both", linestyle="--", alpha=0.5)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
