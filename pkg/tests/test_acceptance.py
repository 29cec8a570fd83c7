"""Release acceptance suite: one test per shipped guarantee.

Each test prints a single ``criterion N: PASS/FAIL`` line with the measured
numbers, so ``pytest -s tests/test_acceptance.py`` doubles as an acceptance
report.  Monte Carlo criteria pin their seeds and sample sizes; the stated
tolerances are part of the package contract, not test conveniences.
"""

import math

import numpy as np
import pytest

from dlczsim.analysis import (
    DecayPoint,
    ParseError,
    chsh_from_log,
    compute_g_si,
    detection_efficiency,
    fit_exponential,
    fit_fringe,
    format_event_log,
    gate_and_count,
    parse_event_log_text,
)
from dlczsim.angular import HalfInt, LevelScheme, branching_table, cg, mixing_angle
from dlczsim.predictor import (
    FringeModel,
    MeasurementSetting,
    chsh_s,
    chsh_setting_table,
    coincidence_rate,
    predict_ideal_s,
)
from dlczsim.simulator import DEFAULT_ETA, ExperimentConfig, run_trials
from dlczsim.states import (
    EnsembleModel,
    excited_commutator_deviation,
    mode_vacuum_overlap,
)


def _verdict(criterion: int, ok: bool, detail: str) -> None:
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def _bright_config(**overrides) -> ExperimentConfig:
    """Unit efficiencies and zero background isolate the quantum state."""
    base = dict(
        eta=DEFAULT_ETA,
        excitation_prob=0.05,
        retrieval_eff=1.0,
        det_eff_s=1.0,
        det_eff_i=1.0,
        bg_prob_s=0.0,
        bg_prob_i=0.0,
        base_visibility=1.0,
        delta_t_ns=0.0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _fringe_weight(eta: float, theta_i_rad: float) -> float:
    """Half the peak-to-trough swing of the ideal fringe, per unit amplitude."""
    c, s = math.cos(eta), math.sin(eta)
    return c * c * math.cos(theta_i_rad) ** 2 + s * s * math.sin(theta_i_rad) ** 2


def test_criterion_1_mixing_angle():
    eta = mixing_angle(LevelScheme.of(3, 2, 3))
    ratio = eta / (math.pi / 4)
    _verdict(
        1,
        abs(ratio - 0.81) <= 0.005,
        f"eta/(pi/4) = {ratio:.6f} for (F_a, F_b, F_c) = (3, 2, 3); target 0.81 +- 0.005",
    )


def test_criterion_2_ideal_chsh():
    s_scheme = predict_ideal_s(DEFAULT_ETA)
    s_max = predict_ideal_s(math.pi / 4)
    tsirelson = 2.0 * math.sqrt(2.0)
    ok = abs(s_scheme - 2.77) <= 0.01 and abs(s_max - tsirelson) <= 1e-9
    _verdict(
        2,
        ok,
        f"S(eta) = {s_scheme:.4f} (target 2.77 +- 0.01); "
        f"S(pi/4) = {s_max:.10f} (target 2*sqrt(2) +- 1e-9)",
    )


def test_criterion_3_reference_correlation_set():
    # a reference set of four measured E values with their errors
    e_pairs = [(0.641, 0.024), (0.587, 0.027), (0.471, 0.029), (-0.595, 0.027)]
    result = chsh_s(e_pairs)
    ok = abs(result.s - 2.29) <= 0.005 and abs(result.sigma_s - 0.05) <= 0.005
    _verdict(
        3,
        ok,
        f"S = {result.s:.4f} (target 2.29 +- 0.005), "
        f"sigma_S = {result.sigma_s:.4f} (target 0.05 +- 0.005)",
    )


def test_criterion_4_pipeline_bell_violation():
    settings = chsh_setting_table()
    n = 1_000_000

    ideal = chsh_from_log(run_trials(_bright_config(), settings, n, seed=101))
    ok_ideal = abs(ideal.s - 2.77) <= 3 * ideal.sigma_s

    # white-noise admixture chosen so the *fitted* fringe contrast is 0.90
    m = _fringe_weight(DEFAULT_ETA, math.radians(67.5))
    v_star = 0.45 / (0.45 + 0.1 * m)
    degraded_config = _bright_config(base_visibility=v_star)

    scan = [MeasurementSetting(7.5 * k, 67.5) for k in range(48)]
    rows = gate_and_count(run_trials(degraded_config, scan, 100_000, seed=404)).rows
    points = [
        (math.radians(s.theta_s_deg), rows[i].n_si, math.sqrt(max(rows[i].n_si, 1.0)))
        for i, s in enumerate(scan)
    ]
    fit = fit_fringe(points, DEFAULT_ETA, math.radians(67.5))
    ok_vis = abs(fit.visibility - 0.90) <= 0.02

    degraded = chsh_from_log(run_trials(degraded_config, settings, n, seed=303))
    ok_s = 2.0 < degraded.s < 2.77

    _verdict(
        4,
        ok_ideal and ok_vis and ok_s,
        f"ideal S = {ideal.s:.4f} +- {ideal.sigma_s:.4f} (|S - 2.77| < 3 sigma); "
        f"degraded fringe visibility = {fit.visibility:.4f} (target 0.90 +- 0.02); "
        f"degraded S = {degraded.s:.4f} in (2, 2.77)",
    )


def test_criterion_5_fringe_visibility_fit():
    theta_i_deg = 67.5
    theta_i = math.radians(theta_i_deg)
    m = _fringe_weight(DEFAULT_ETA, theta_i)
    # peak = 2 m a + b = 200 counts and b = m a / 9 give true visibility 0.90
    amplitude = 1800.0 / (19.0 * m)
    background = amplitude * m / 9.0
    model = FringeModel(eta=DEFAULT_ETA, amplitude=amplitude, background=background)

    rng = np.random.default_rng(0)
    points = []
    for k in range(72):
        theta_s_deg = 5.0 * k
        mean = coincidence_rate(model, MeasurementSetting(theta_s_deg, theta_i_deg))
        points.append((math.radians(theta_s_deg), float(rng.poisson(mean)), math.sqrt(mean)))
    fit = fit_fringe(points, DEFAULT_ETA, theta_i)
    _verdict(
        5,
        abs(fit.visibility - 0.90) <= 0.02,
        f"fitted visibility = {fit.visibility:.4f} from Poisson data at ~200 peak counts; "
        f"target 0.90 +- 0.02",
    )


def test_criterion_6_memory_decay_constant():
    tau_in = 3700.0
    points = []
    for k, delta_t in enumerate([200.0, 1000.0, 2000.0, 4000.0, 7000.0]):
        config = ExperimentConfig(
            eta=math.pi / 4,
            excitation_prob=0.2,
            retrieval_eff=1.0,
            det_eff_s=1.0,
            det_eff_i=1.0,
            bg_prob_s=0.0,
            bg_prob_i=0.0,
            base_visibility=0.9,
            delta_t_ns=delta_t,
            memory_tau_ns=tau_in,
            retrieval_tau_ns=tau_in,
            cycle_ns=7500.0,
            dark_ns=7400.0,
        )
        log = run_trials(config, [MeasurementSetting(0.0, 0.0)], 40_000_000, seed=60 + k)
        g, sigma = compute_g_si(gate_and_count(log))
        points.append(DecayPoint(delta_t, g, sigma))
    fit = fit_exponential(points)
    rel_err = abs(fit.tau_ns - tau_in) / tau_in
    _verdict(
        6,
        rel_err <= 0.05,
        f"fitted tau = {fit.tau_ns:.1f} +- {fit.sigma_tau_ns:.1f} ns from input {tau_in:.0f} ns "
        f"(relative error {100 * rel_err:.2f}%, tolerance 5%)",
    )


def test_criterion_7_collective_operator_checks():
    table = branching_table(LevelScheme.of(3, 2, 3))
    sizes = range(4, 13)
    worst_overlap = 0.0
    deviations = []
    for n in sizes:
        model = EnsembleModel.with_random_positions(
            n, f_a=3, f_b=2, delta_k=(0.3, -1.1, 0.7), seed=5
        )
        for a in (-1, 1):
            for b in (-1, 1):
                overlap = mode_vacuum_overlap(model, table, a, b)
                expected = 1.0 if a == b else 0.0
                worst_overlap = max(worst_overlap, abs(overlap - expected))
        deviations.append(excited_commutator_deviation(model, -1, HalfInt.of(0)))
    exponent = float(np.polyfit(np.log(list(sizes)), np.log(deviations), 1)[0])
    ok = worst_overlap <= 1e-10 and abs(exponent + 1.0) <= 0.15
    _verdict(
        7,
        ok,
        f"vacuum mode overlaps within {worst_overlap:.1e} of identity (tolerance 1e-10); "
        f"commutator deviation ~ N^{exponent:.3f} (target -1 +- 0.15)",
    )


_LOG_STEM = (
    "# version=1\n"
    "# trials_per_setting=100\n"
    "# setting 0 0.0 0.0\n"
    "# seed=7\n"
)

_MALFORMED_LOGS = [
    "",
    "0 D1 66 0\n",
    "# version=2\n" + _LOG_STEM[12:],
    _LOG_STEM + "0 D1 66\n",
    _LOG_STEM + "0 D9 66 0\n",
    _LOG_STEM + "x D1 66 0\n",
    _LOG_STEM + "-1 D1 66 0\n",
    _LOG_STEM + "0 D1 66 3\n",
    _LOG_STEM + "0 D1 67 0\n",
    _LOG_STEM + "0 D1 2000 0\n",
    _LOG_STEM + "2 D1 66 0\n1 D1 66 0\n",
    _LOG_STEM + "0 D1 66 0\n# extra=1\n",
    _LOG_STEM + "\n",
    "# version=1\n# seed=1\n# seed=2\n",
    "# version=1\n# seed=1\n# trials_per_setting=5\n",
    "# version=1\n# seed=1\n# trials_per_setting=5\n# setting 1 0 0\n",
    "# version=1\n# seed=one\n# trials_per_setting=5\n# setting 0 0 0\n",
    "# version=1\n# seed=1\n# trials_per_setting=5\n# setting 0 0 0\n# frogs=1\n",
    "# version=1\n# seed=1\n# trials_per_setting=5\n# setting 0 0 0\n# eta=9\n",
]


def test_criterion_8_property_suites():
    # (a) exact angular-momentum couplings stay orthonormal and complete
    worst_cg = 0.0
    for twice_j1 in range(0, 9):
        for twice_j2 in range(0, 9):
            j1, j2 = twice_j1 / 2.0, twice_j2 / 2.0
            m_pairs = [
                (m1, m2)
                for m1 in np.arange(-j1, j1 + 1)
                for m2 in np.arange(-j2, j2 + 1)
            ]
            coupled = [
                (twice_total / 2.0, m_tot)
                for twice_total in range(abs(twice_j1 - twice_j2), twice_j1 + twice_j2 + 1, 2)
                for m_tot in np.arange(-twice_total / 2.0, twice_total / 2.0 + 1)
            ]
            u = np.array([[cg(j1, m1, j2, m2, jt, mt) for jt, mt in coupled] for m1, m2 in m_pairs])
            eye = np.eye(len(coupled))
            worst_cg = max(worst_cg, np.abs(u.T @ u - eye).max(), np.abs(u @ u.T - eye).max())
    ok_cg = worst_cg <= 1e-12

    # (b) no parameter choice beats the quantum bound
    tsirelson = 2.0 * math.sqrt(2.0)
    s_grid = [abs(predict_ideal_s(eta)) for eta in np.linspace(0.0, math.pi / 2, 181)]
    ok_bound = max(s_grid) <= tsirelson + 1e-12

    # (c) a seed pins the simulation down to the output bytes
    cfg = ExperimentConfig()
    settings = [MeasurementSetting(0, 0), MeasurementSetting(-22.5, 45)]
    text_a = format_event_log(run_trials(cfg, settings, 50_000, seed=9))
    text_b = format_event_log(run_trials(cfg, settings, 50_000, seed=9))
    text_c = format_event_log(run_trials(cfg, settings, 50_000, seed=10))
    ok_seed = text_a == text_b and text_a != text_c

    # (d) the log parser rejects every corpus entry with a diagnostic
    rejected = 0
    for text in _MALFORMED_LOGS:
        with pytest.raises(ParseError):
            parse_event_log_text(text)
        rejected += 1
    ok_parser = rejected == len(_MALFORMED_LOGS)

    _verdict(
        8,
        ok_cg and ok_bound and ok_seed and ok_parser,
        f"coupling orthogonality within {worst_cg:.1e} (tolerance 1e-12) for all j <= 4; "
        f"max |S| = {max(s_grid):.10f} <= 2*sqrt(2) + 1e-12; "
        f"byte-identical logs per seed: {ok_seed}; "
        f"malformed logs rejected: {rejected}/{len(_MALFORMED_LOGS)}",
    )


def test_criterion_9_efficiency_ratios():
    log = run_trials(ExperimentConfig(), [MeasurementSetting(0.0, 0.0)], 50_000_000, seed=77)
    alpha_s, alpha_i = detection_efficiency(gate_and_count(log))
    ok = abs(alpha_s - 0.02) <= 0.002 and abs(alpha_i - 0.02) <= 0.002
    _verdict(
        9,
        ok,
        f"alpha_s = {alpha_s:.5f}, alpha_i = {alpha_i:.5f} at calibrated defaults; "
        f"target 0.02 within 10% relative",
    )
