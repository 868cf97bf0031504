"""Test whether a high-dimensional covariance matrix is banded and estimate
its bandwidth (``p`` may far exceed ``n``)."""

from .bandtest import BandTestResult, TestScan, run_test, scan
from .bandwidth import (
    BandwidthEstimate,
    DiffSequence,
    band_matrix,
    bl_bandwidth,
    change_point_estimator,
    diff_sequence,
    fixed_threshold_estimator,
    sample_covariance,
)
from .errors import BandcovError, DataError, DegenerateError, ParameterError
from .loess import local_linear_fit
from .simgen import MAModelSpec, generate, population_quantities, population_sigma, run_experiment
from .ustat import (
    DataMatrix,
    LagProfile,
    lag_profile,
    lag_profile_bruteforce,
    p_value,
    t_stat,
    v_stat,
    w_stat,
)

__version__ = "0.1.0"
