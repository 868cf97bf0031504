"""Bandedness test for a single bandwidth and scans over a range of bandwidths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ParameterError
from .ustat import LagProfile, as_data_matrix, lag_profile, p_value, t_stat, v_stat, w_stat

__all__ = [
    "DEFAULT_ALPHA",
    "BandTestResult",
    "TestScan",
    "critical_value",
    "default_k_max",
    "run_test",
    "scan",
    "test_from_profile",
]

DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class BandTestResult:
    """Outcome of testing ``H_k0: Sigma = B_k(Sigma)``."""

    k: int
    w: float
    v: float
    t: float
    p_value: float
    reject: bool
    alpha: float

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "w": self.w,
            "v": self.v,
            "t": self.t,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class TestScan:
    """Test results for ``k = 0..k_max`` built from one shared lag profile.

    ``tilde_t[k] = W_nk / V_nk``, so ``n * tilde_t[k] == results[k].t``.
    """

    __test__ = False  # keep pytest from collecting this class

    profile: LagProfile
    results: list[BandTestResult] = field(repr=False)
    tilde_t: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def k_max(self) -> int:
        return len(self.results) - 1

    @property
    def p_values(self) -> np.ndarray:
        return np.array([r.p_value for r in self.results])

    def first_accepted(self) -> int | None:
        """Smallest k whose null is not rejected, or None."""
        for r in self.results:
            if not r.reject:
                return r.k
        return None


def _check_alpha(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def critical_value(alpha: float = DEFAULT_ALPHA) -> float:
    """Rejection threshold ``2 z_alpha`` for ``T_nk``."""
    return 2.0 * float(ndtri(1.0 - _check_alpha(alpha)))


def default_k_max(n: int, p: int) -> int:
    return min(p - 2, n)


def test_from_profile(profile: LagProfile, k: int, alpha: float = DEFAULT_ALPHA) -> BandTestResult:
    alpha = _check_alpha(alpha)
    if int(k) != k or not 0 <= k <= profile.p - 2:
        raise ParameterError(
            f"tested bandwidth must be an integer in [0, {profile.p - 2}], got {k}"
        )
    k = int(k)
    w = w_stat(profile, k)
    v = v_stat(profile, k)
    t = t_stat(w, v, profile.n)
    pv = p_value(t)
    return BandTestResult(k=k, w=w, v=v, t=t, p_value=pv, reject=pv <= alpha, alpha=alpha)


test_from_profile.__test__ = False


def run_test(data, k: int, alpha: float = DEFAULT_ALPHA) -> BandTestResult:
    """Test whether the covariance of ``data`` is banded with bandwidth ``k``.

    Rejects when ``T_nk >= 2 z_alpha``, i.e. when the one-sided p-value is at
    most ``alpha``.  ``k`` must be in ``[0, p - 2]``; at ``k = p - 1`` the
    alternative is empty.
    """
    _check_alpha(alpha)
    return test_from_profile(lag_profile(as_data_matrix(data)), k, alpha)


def scan(data, k_max: int | None = None, alpha: float = DEFAULT_ALPHA) -> TestScan:
    """Run the test for every ``k = 0..k_max`` off a single lag profile.

    Parameters
    ----------
    data : DataMatrix or array_like
    k_max : int, optional
        Largest bandwidth tested, ``1 <= k_max <= p - 2``.  Defaults to
        ``min(p - 2, n)``.
    alpha : float
        Nominal level used for the per-k ``reject`` flags.
    """
    dm = as_data_matrix(data)
    if k_max is None:
        k_max = default_k_max(dm.n, dm.p)
    if int(k_max) != k_max or not 1 <= k_max <= dm.p - 2:
        raise ParameterError(f"k_max must be an integer in [1, {dm.p - 2}], got {k_max}")
    _check_alpha(alpha)
    profile = lag_profile(dm)
    results = [test_from_profile(profile, k, alpha) for k in range(int(k_max) + 1)]
    tilde_t = np.array([r.w / r.v for r in results])
    return TestScan(profile=profile, results=results, tilde_t=tilde_t)
