"""Probe traffic volume estimation from anonymous footprint point data.

Estimates the number of probes crossing a virtual cordon from speed-tagged
point records alone (no pseudonyms, no trajectories), provides the exact
theoretical distribution of the estimate, optimizes cordon length for
precision, and ships Monte Carlo and calibration harnesses to validate all
of it.
"""

__version__ = "0.1.0"

from .calibration import CalibrationModel, CalibrationPair, fit_through_origin, mape, predict
from .cordon_optimizer import OptimumReport, objective_curve, optimize_cordon
from .distribution_engine import (
    PrecisionReport,
    VolumePdf,
    bernoulli_var_term,
    cv,
    interval_estimate,
    m_fold_pdf,
    normal_approx,
    pdf_moments,
    precision_report,
    single_probe_pdf,
    variance,
    vmr,
)
from .estimator import VolumeEstimate, estimate_probe_volume, extra_record_prob, min_records
from .footprint_data import (
    CordonSample,
    CordonSpec,
    FootprintRecord,
    crop_to_cordon,
    read_footprints_csv,
    write_footprints_csv,
)
from .kernels import active_backend
from .probe_simulator import (
    ExperimentReport,
    ScenarioConfig,
    SimSummary,
    SiteConfig,
    run_regression_experiment,
    run_scenario,
    simulate_pass,
)
from .speed_model import (
    SpeedComponent,
    SpeedDistribution,
    eval_pdf,
    integrate_weighted,
    load_distribution,
    sample,
)

__all__ = [
    "CalibrationModel",
    "CalibrationPair",
    "CordonSample",
    "CordonSpec",
    "ExperimentReport",
    "FootprintRecord",
    "OptimumReport",
    "PrecisionReport",
    "ScenarioConfig",
    "SimSummary",
    "SiteConfig",
    "SpeedComponent",
    "SpeedDistribution",
    "VolumeEstimate",
    "VolumePdf",
    "active_backend",
    "bernoulli_var_term",
    "crop_to_cordon",
    "cv",
    "estimate_probe_volume",
    "eval_pdf",
    "extra_record_prob",
    "fit_through_origin",
    "integrate_weighted",
    "interval_estimate",
    "load_distribution",
    "m_fold_pdf",
    "mape",
    "min_records",
    "normal_approx",
    "objective_curve",
    "optimize_cordon",
    "pdf_moments",
    "precision_report",
    "predict",
    "read_footprints_csv",
    "run_regression_experiment",
    "run_scenario",
    "sample",
    "simulate_pass",
    "single_probe_pdf",
    "variance",
    "vmr",
    "write_footprints_csv",
]
