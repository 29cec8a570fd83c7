"""Atom-photon entanglement toolkit: prediction, simulation and analysis.

The package covers the full chain of a write/read photon-pair experiment:

- :mod:`dlczsim.angular` computes exact angular-momentum branching ratios
  and the mixing angle eta of the entangled state they produce.
- :mod:`dlczsim.states` holds the two-qubit density matrix model and the
  finite-N collective-operator checks behind it.
- :mod:`dlczsim.predictor` turns a state into measurable numbers:
  coincidence fringes, correlation coefficients E and the CHSH sum S.
- :mod:`dlczsim.simulator` is a seeded Monte Carlo that emits time-tagged
  detector click logs for configurable efficiencies and backgrounds.
- :mod:`dlczsim.analysis` parses logs, gates and counts clicks, and fits
  fringes and decay curves the way the measured data are treated.
- :mod:`dlczsim.cli` wires the above into the ``dlczsim`` command.
"""

from .analysis import (
    CoincidenceTable,
    DecayPoint,
    ExponentialFit,
    FitError,
    FringeFit,
    GateConfig,
    ParseError,
    SettingCounts,
    chsh_from_log,
    compute_g_si,
    detection_efficiency,
    fit_exponential,
    fit_fringe,
    format_event_log,
    gate_and_count,
    parse_event_log,
    parse_event_log_text,
    write_event_log,
)
from .angular import (
    BranchingTable,
    HalfInt,
    LevelScheme,
    branching_table,
    cg,
    mixing_angle,
    mixing_cos_sq,
)
from .predictor import (
    CANONICAL_ANGLES_DEG,
    CHSHResult,
    CountQuartet,
    FringeModel,
    MeasurementSetting,
    chsh_s,
    chsh_setting_table,
    coincidence_rate,
    correlation_e,
    predict_ideal_e,
    predict_ideal_s,
)
from .simulator import (
    DEFAULT_ETA,
    DetectionEvent,
    EventLog,
    ExperimentConfig,
    decoherence_visibility,
    expected_g_si,
    load_config,
    load_settings,
    run_trials,
)
from .states import (
    EnsembleModel,
    TwoQubitState,
    add_white_noise,
    concurrence,
    excited_commutator_deviation,
    ideal_state,
    mode_vacuum_overlap,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # angular momentum
    "BranchingTable",
    "HalfInt",
    "LevelScheme",
    "branching_table",
    "cg",
    "mixing_angle",
    "mixing_cos_sq",
    # quantum states
    "EnsembleModel",
    "TwoQubitState",
    "add_white_noise",
    "concurrence",
    "excited_commutator_deviation",
    "ideal_state",
    "mode_vacuum_overlap",
    # predictions
    "CANONICAL_ANGLES_DEG",
    "CHSHResult",
    "CountQuartet",
    "FringeModel",
    "MeasurementSetting",
    "chsh_s",
    "chsh_setting_table",
    "coincidence_rate",
    "correlation_e",
    "predict_ideal_e",
    "predict_ideal_s",
    # simulation
    "DEFAULT_ETA",
    "DetectionEvent",
    "EventLog",
    "ExperimentConfig",
    "decoherence_visibility",
    "expected_g_si",
    "load_config",
    "load_settings",
    "run_trials",
    # analysis
    "CoincidenceTable",
    "DecayPoint",
    "ExponentialFit",
    "FitError",
    "FringeFit",
    "GateConfig",
    "ParseError",
    "SettingCounts",
    "chsh_from_log",
    "compute_g_si",
    "detection_efficiency",
    "fit_exponential",
    "fit_fringe",
    "format_event_log",
    "gate_and_count",
    "parse_event_log",
    "parse_event_log_text",
    "write_event_log",
]
