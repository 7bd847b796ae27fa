"""Acceptance suite: every criterion at its stated tolerance, one pass/fail
line per criterion (run with ``pytest -s`` to see the lines as they print).

The two figure-reproduction criteria run the full paper-scale scenario
(N_A=128, K=8, N_U=8) and take a couple of minutes combined.
"""

import itertools
import math
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from mumimo import modem
from mumimo.channel import Link, Scenario, generate_channels
from mumimo.cli import main
from mumimo.detectors import linear_detect, ml_detect, mmse_filter, zf_filter
from mumimo.metrics import count_bit_errors, noise_variance_for
from mumimo.numerics import logdet2_hpd
from mumimo.precoders import (
    PowerBudget,
    linear_precode,
    mmse_precoder_matrix,
    thp_precode,
    thp_receive,
    vp_precode,
    zf_precoder_matrix,
)
from mumimo.simkernel import Experiment, ExperimentSpec, run_experiment
from mumimo.streams import RandomStream

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@contextmanager
def criterion(num, name):
    try:
        yield
    except Exception:
        print(f"[acceptance] criterion {num:2d} ({name}): FAIL")
        raise
    print(f"[acceptance] criterion {num:2d} ({name}): PASS")


def gap_exceeds_two_stderr(better, worse):
    """better.value < worse.value with the gap above 2 pooled stderr."""
    gap = worse.value - better.value
    pooled = math.sqrt(better.stderr**2 + worse.stderr**2)
    return gap > 2.0 * pooled


def random_cmatrix(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_qpsk(rng, n):
    return modem.modulate(rng.integers(0, 2, size=2 * n))


@pytest.fixture(scope="module")
def fig4_run():
    scenario = Scenario(
        n_a=128,
        k_users=8,
        n_u=8,
        link=Link.UPLINK,
        snr_grid_db=(0.0, 5.0, 10.0, 15.0),
        packet_len=1000,
        n_packets=200,
        seed=2024,
    )
    spec = ExperimentSpec(
        scenario=scenario,
        algorithms=("rmf", "mmse", "sic"),
        experiment=Experiment.UPLINK_BER,
        power_budget=PowerBudget(float(scenario.n_streams)),
    )
    return run_experiment(spec)


@pytest.fixture(scope="module")
def fig5_run():
    scenario = Scenario(
        n_a=128,
        k_users=8,
        n_u=8,
        link=Link.DOWNLINK,
        snr_grid_db=(10.0,),
        packet_len=1000,
        n_packets=100,
        seed=2024,
    )
    spec = ExperimentSpec(
        scenario=scenario,
        algorithms=("tmf", "mmse", "rbd", "thp"),
        experiment=Experiment.DOWNLINK_SUMRATE,
        power_budget=PowerBudget(float(scenario.n_streams)),
    )
    return run_experiment(spec)


def test_criterion_1_fig4_ber_ordering(fig4_run):
    with criterion(1, "Fig. 4 BER ordering at paper scale"):
        table = fig4_run.table
        snr = 10.0  # mid-range point of the 0-15 dB sweep where curves separate
        rows = {
            name: table.value_of(name, snr, "ber")
            for name in ("rmf_su", "sic", "mmse", "rmf")
        }
        order = ["rmf_su", "sic", "mmse", "rmf"]
        for better, worse in zip(order, order[1:]):
            assert rows[better].value < rows[worse].value, (
                f"BER({better})={rows[better].value} not below "
                f"BER({worse})={rows[worse].value} at {snr} dB"
            )
            assert gap_exceeds_two_stderr(rows[better], rows[worse]), (
                f"gap {better} vs {worse} within 2 pooled stderr"
            )


def test_criterion_2_fig5_sumrate_ordering(fig5_run):
    with criterion(2, "Fig. 5 sum-rate ordering at paper scale"):
        table = fig5_run.table
        rows = {
            name: table.value_of(name, 10.0, "sum_rate_bits")
            for name in ("tmf_su", "thp", "rbd", "mmse", "tmf")
        }
        order = ["tmf_su", "thp", "rbd", "mmse", "tmf"]
        for better, worse in zip(order, order[1:]):
            gap = rows[better].value - rows[worse].value
            pooled = math.sqrt(rows[better].stderr ** 2 + rows[worse].stderr ** 2)
            assert gap > 2.0 * pooled, (
                f"sum-rate {better}={rows[better].value:.2f} vs "
                f"{worse}={rows[worse].value:.2f}: gap {gap:.2f} <= 2*{pooled:.2f}"
            )


def test_criterion_3_zf_exactness():
    with criterion(3, "zero-noise ZF exactness, detector and precoder"):
        rng = np.random.default_rng(33)
        errors = 0
        total = 0
        for _ in range(1000):
            # Uplink detection: H is N_A x K*N_U = 16 x 4.
            h_up = random_cmatrix(rng, 16, 4)
            s = random_qpsk(rng, 4)
            s_hat = linear_detect(zf_filter(h_up), h_up @ s)
            e, n = count_bit_errors(modem.demodulate(s), modem.demodulate(s_hat))
            errors += e
            total += n
            # Downlink precoding: H is K*N_U x N_A = 4 x 16.
            h_dn = random_cmatrix(rng, 4, 16)
            w = zf_precoder_matrix(h_dn)
            out = linear_precode(w, s, PowerBudget(4.0))
            y = h_dn @ out.x
            s_hat = modem.hard_slice(y / out.beta)
            e, n = count_bit_errors(modem.demodulate(s), modem.demodulate(s_hat))
            errors += e
            total += n
        assert total == 2 * 1000 * 8
        assert errors == 0


def test_criterion_4_thp_loopback():
    with criterion(4, "zero-noise THP loopback"):
        rng = np.random.default_rng(44)
        failures = 0
        for _ in range(1000):
            h = random_cmatrix(rng, 4, 16)
            s = random_qpsk(rng, 4)
            out = thp_precode(h, s, PowerBudget(4.0))
            recovered = thp_receive(h @ out.x, out.aux["gains"], out.beta)
            if not np.array_equal(recovered, s):
                failures += 1
        assert failures == 0


def test_criterion_5_vp_dominance():
    with criterion(5, "vector perturbation never above the unperturbed power"):
        rng = np.random.default_rng(55)
        for _ in range(1000):
            h = random_cmatrix(rng, 8, 2)
            s = random_qpsk(rng, 2)
            w = zf_precoder_matrix(h.conj().T)  # 2-stream downlink channel 2x8
            out = vp_precode(h.conj().T, s, w, radius=1)
            perturbed = w @ (s + modem.TAU * out.aux["p"])
            unperturbed = w @ s
            assert float(np.vdot(perturbed, perturbed).real) <= float(
                np.vdot(unperturbed, unperturbed).real
            )


def test_criterion_6_ml_oracle_equivalence():
    with criterion(6, "ML detector matches independent enumeration"):
        rng = np.random.default_rng(66)
        for _ in range(500):
            h = random_cmatrix(rng, 6, 2)
            s = random_qpsk(rng, 2)
            r = h @ s + 0.6 * (rng.standard_normal(6) + 1j * rng.standard_normal(6))
            got = ml_detect(r, h)
            best, best_obj = None, np.inf
            for combo in itertools.product(modem.QPSK.points, repeat=2):
                cand = np.array(combo)
                obj = float(np.sum(np.abs(r - h @ cand) ** 2))
                if obj < best_obj:
                    best_obj, best = obj, cand
            assert np.array_equal(got, best)


def test_criterion_7_logdet_eigenvalue_oracle():
    with criterion(7, "log-det agrees with eigenvalue oracle within 1e-9"):
        rng = np.random.default_rng(77)
        for i in range(100):
            n = 8 + (i % 8) * 8  # sizes 8..64
            g = random_cmatrix(rng, n, n)
            a = np.eye(n) + g @ g.conj().T
            want = float(np.sum(np.log2(np.linalg.eigvalsh(a))))
            assert abs(logdet2_hpd(a) - want) <= 1e-9


def test_criterion_8_mmse_to_zf_limits():
    with criterion(8, "MMSE converges to ZF at vanishing loading"):
        rng = np.random.default_rng(88)
        h_dn = random_cmatrix(rng, 4, 16)
        wz = zf_precoder_matrix(h_dn)
        devs = [
            float(np.linalg.norm(mmse_precoder_matrix(h_dn, g) - wz))
            for g in (1e-2, 1e-4, 1e-6, 1e-8)
        ]
        assert all(b <= a for a, b in zip(devs, devs[1:]))
        assert devs[-1] <= 1e-4

        h_up = random_cmatrix(rng, 16, 4)
        fz = zf_filter(h_up).w
        fm = mmse_filter(h_up, 1.0, 1e-8).w
        assert float(np.linalg.norm(fm - fz)) <= 1e-4
        assert float(np.linalg.norm(fm.conj().T @ h_up - np.eye(4))) <= 1e-4


def test_criterion_9_worker_determinism(tmp_path):
    with criterion(9, "CI preset byte-identical for workers 1 and 4"):
        cfg = CONFIG_DIR / "ci_uplink_ber.yaml"
        out1 = tmp_path / "w1"
        out4 = tmp_path / "w4"
        assert main(["run", str(cfg), "--out", str(out1), "--workers", "1", "--no-figures"]) == 0
        assert main(["run", str(cfg), "--out", str(out4), "--workers", "4", "--no-figures"]) == 0
        b1 = (out1 / "results.csv").read_bytes()
        b4 = (out4 / "results.csv").read_bytes()
        assert b1 == b4


def test_criterion_10_snr_bookkeeping(fig4_run):
    with criterion(10, "SNR definition and realized noise variance"):
        assert noise_variance_for(0.0, 1, 1.0) == 1.0
        noise = fig4_run.metadata["noise"]
        assert len(noise) == 4
        for stats in noise.values():
            ratio = stats["realized_sigma_n2"] / stats["configured_sigma_n2"]
            assert abs(ratio - 1.0) <= 0.02
