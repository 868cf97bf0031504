"""Bandwidth estimators for a banded covariance matrix.

Three families:

* first crossing of the scaled successive differences below a threshold,
* a left-regression / right-flat change-point fit on the differences,
* the sample-splitting risk minimisers of Bickel and Levina (``BLa`` with a
  one-third split and the (1,1) norm, ``BLb`` with ``n (1 - 1/log n)`` and the
  Frobenius norm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bandtest import TestScan
from .errors import DataError, ParameterError
from .loess import local_linear_fit, ols_line_fit
from .ustat import as_data_matrix

__all__ = [
    "DEFAULT_DELTA",
    "DEFAULT_THETA",
    "DEFAULT_SPAN",
    "PVALUE_FLOOR",
    "LOCAL_FIT_MIN_K",
    "DiffSequence",
    "BandwidthEstimate",
    "diff_sequence",
    "fixed_threshold_estimator",
    "change_point_estimator",
    "change_point_inputs",
    "change_point_err",
    "sample_covariance",
    "band_matrix",
    "norm_11",
    "frobenius_norm",
    "bl_split_sizes",
    "bl_risk_curve",
    "bl_bandwidth",
]

DEFAULT_DELTA = 0.5
DEFAULT_THETA = 0.06
DEFAULT_SPAN = 0.75
DEFAULT_SPLITS = 50
PVALUE_FLOOR = 1e-10
# Below this k the left fit is an OLS line; local fitting needs more points.
LOCAL_FIT_MIN_K = 5


@dataclass(frozen=True)
class DiffSequence:
    """``values[k] = n**delta * (tilde_t[k] - tilde_t[k+1])`` for ``k = 0..M-1``."""

    delta: float
    values: np.ndarray
    n: int

    @property
    def M(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BandwidthEstimate:
    """Estimated bandwidth with the trail needed to reproduce it.

    ``status`` is ``"ok"`` or ``"no_crossing"``; in the latter case ``k_hat``
    is None (the threshold rule found no qualifying k).
    """

    method: str
    k_hat: int | None
    diagnostics: dict = field(default_factory=dict)
    status: str = "ok"

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "k_hat": self.k_hat,
            "diagnostics": _plain(self.diagnostics),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# Threshold estimator
# ---------------------------------------------------------------------------


def diff_sequence(scan: TestScan, delta: float = DEFAULT_DELTA, M: int | None = None) -> DiffSequence:
    """Scaled successive differences of ``W_nk / V_nk`` from a scan.

    ``M`` defaults to the largest value the scan supports, ``len(tilde_t) - 1``.
    """
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    return _diffs(scan.tilde_t, scan.n, delta, M)


def _diffs(tilde_t, n, delta, M):
    tilde_t = np.asarray(tilde_t, dtype=float)
    if M is None:
        M = len(tilde_t) - 1
    if int(M) != M or M < 1 or M + 1 > len(tilde_t):
        raise ParameterError(
            f"M must be an integer in [1, {len(tilde_t) - 1}] for this scan, got {M}"
        )
    M = int(M)
    values = n**delta * (tilde_t[:M] - tilde_t[1:M + 1])
    return DiffSequence(delta=float(delta), values=values, n=int(n))


def fixed_threshold_estimator(diffs: DiffSequence, theta: float = DEFAULT_THETA) -> BandwidthEstimate:
    """Smallest ``k`` with ``|d_nk^(delta)| < theta``."""
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    values = np.asarray(diffs.values)
    if values.size == 0:
        raise ParameterError("empty difference sequence")
    below = np.flatnonzero(np.abs(values) < theta)
    diag = {"theta": float(theta), "delta": diffs.delta, "M": diffs.M, "d": values}
    if below.size == 0:
        return BandwidthEstimate("FixedThreshold", None, {**diag, "crossing": None}, "no_crossing")
    k_hat = int(below[0])
    return BandwidthEstimate("FixedThreshold", k_hat, {**diag, "crossing": k_hat})


# ---------------------------------------------------------------------------
# Change-point estimator
# ---------------------------------------------------------------------------


def change_point_err(dseq, k: int, span: float = DEFAULT_SPAN) -> float:
    """Absolute-deviation error of the split fit at candidate ``k``."""
    d = np.asarray(dseq, dtype=float)
    xs = np.arange(k + 1, dtype=float)
    if k >= LOCAL_FIT_MIN_K:
        left = local_linear_fit(xs, d[: k + 1], span)
    else:
        left = ols_line_fit(xs, d[: k + 1])
    resid = np.concatenate([np.abs(left - d[: k + 1]), np.abs(d[k] - d[k + 1:])])
    return math.fsum(resid.tolist())


def change_point_estimator(dseq, candidates=None, span: float = DEFAULT_SPAN) -> BandwidthEstimate:
    """Argmin over candidates of the left-fit / right-flat error.

    Parameters
    ----------
    dseq : array_like
        Unscaled differences ``d_nj`` for ``j = 0..M``.
    candidates : iterable of int, optional
        Subset of ``1..M``; defaults to all of them.
    span : float
        Smoothing span of the local-linear left fit.

    Ties go to the smallest ``k``.
    """
    d = np.asarray(dseq, dtype=float)
    M = d.size - 1
    if M < 2:
        raise ParameterError(f"need at least 3 differences (M >= 2), got M = {M}")
    cands = list(range(1, M + 1)) if candidates is None else sorted({int(k) for k in candidates})
    if not cands:
        raise ParameterError("empty candidate set")
    if cands[0] < 1 or cands[-1] > M:
        raise ParameterError(f"candidates must lie in [1, {M}]")
    errs = [change_point_err(d, k, span) for k in cands]
    best = min(range(len(cands)), key=lambda i: (errs[i], cands[i]))
    diag = {"span": float(span), "M": M, "candidates": cands, "err": errs, "d": d}
    return BandwidthEstimate("ChangePoint", cands[best], diag)


def change_point_inputs(scan: TestScan, M: int | None = None, p_floor: float = PVALUE_FLOOR):
    """Differences (no ``n**delta`` factor) and filtered candidates from a scan.

    Candidates are the ``k`` in ``1..M`` whose p-value exceeds ``p_floor``;
    when none qualifies every ``k`` in ``1..M`` is used.
    """
    d = _diffs(scan.tilde_t, scan.n, 0.0, M)
    dseq = d.values
    M = dseq.size - 1
    pvals = scan.p_values
    cands = [k for k in range(1, M + 1) if pvals[k] > p_floor]
    if not cands:
        cands = list(range(1, M + 1))
    return dseq, cands


# ---------------------------------------------------------------------------
# Bickel-Levina sample splitting
# ---------------------------------------------------------------------------


def sample_covariance(data) -> np.ndarray:
    """Mean-centred sample covariance with divisor ``n - 1``."""
    x = np.asarray(data.values if hasattr(data, "values") else data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("sample covariance needs at least 2 observations")
    xc = x - x.mean(axis=0)
    s = (xc.T @ xc) / (x.shape[0] - 1)
    return (s + s.T) / 2.0


def band_matrix(m, k: int) -> np.ndarray:
    """Zero every entry with ``|i - j| > k``."""
    m = np.asarray(m)
    p = m.shape[0]
    if int(k) != k or not 0 <= k <= p - 1:
        raise ParameterError(f"k must be an integer in [0, {p - 1}], got {k}")
    i, j = np.indices(m.shape)
    return np.where(np.abs(i - j) <= k, m, 0.0)


def norm_11(a) -> float:
    """Maximum absolute column sum."""
    return float(np.abs(np.asarray(a)).sum(axis=0).max())


def frobenius_norm(a) -> float:
    return float(np.sqrt((np.asarray(a) ** 2).sum()))


def bl_split_sizes(n: int, variant: str) -> tuple[int, int]:
    if variant == "BLa":
        n1 = math.floor(n / 3)
    elif variant == "BLb":
        n1 = math.floor(n * (1.0 - 1.0 / math.log(n)))
    else:
        raise ParameterError(f"unknown BL variant {variant!r}")
    n1 = min(max(n1, 2), n - 2)
    if n1 < 2 or n - n1 < 2:
        raise DataError(f"n = {n} too small to split into two samples of size >= 2")
    return n1, n - n1


def _lag_cumsum(e: np.ndarray, k_max: int) -> np.ndarray:
    """Column sums of ``e`` restricted to ``|i - j| <= k`` for ``k = 0..k_max``.

    Returns shape ``(k_max + 1, p)``.
    """
    p = e.shape[0]
    out = np.empty((k_max + 1, p))
    acc = np.diagonal(e).copy()
    out[0] = acc
    for m in range(1, k_max + 1):
        acc[: p - m] += np.diagonal(e, -m)   # e[j + m, j]
        acc[m:] += np.diagonal(e, m)         # e[j - m, j]
        out[m] = acc
    return out


def bl_risk_curve(s1, s2, k_max: int, norm: str) -> np.ndarray:
    """``||B_k(s1) - s2||`` for ``k = 0..k_max`` without forming each band."""
    d = s1 - s2
    if norm == "l11":
        base = np.abs(s2).sum(axis=0)
        cols = base + _lag_cumsum(np.abs(d) - np.abs(s2), k_max)
        return cols.max(axis=1)
    if norm == "fro":
        base = (s2 * s2).sum()
        inside = _lag_cumsum(d * d - s2 * s2, k_max).sum(axis=1)
        return np.sqrt(np.maximum(base + inside, 0.0))
    raise ParameterError(f"unknown norm {norm!r}")


def bl_bandwidth(
    data,
    variant: str = "BLa",
    n_splits: int = DEFAULT_SPLITS,
    k_max: int | None = None,
    rng_seed: int = 0,
) -> BandwidthEstimate:
    """Bickel-Levina bandwidth by repeated random sample splitting.

    Split ``v`` draws a permutation from its own child stream of
    ``SeedSequence(rng_seed)``, so the result does not depend on the order in
    which splits are evaluated.  ``k_max`` defaults to ``min(p - 1, 4 n)``.
    """
    dm = as_data_matrix(data)
    x = dm.values
    n, p = dm.n, dm.p
    if variant not in ("BLa", "BLb"):
        raise ParameterError(f"variant must be 'BLa' or 'BLb', got {variant!r}")
    if int(n_splits) != n_splits or n_splits < 1:
        raise ParameterError(f"n_splits must be a positive integer, got {n_splits}")
    if k_max is None:
        k_max = min(p - 1, 4 * n)
    if int(k_max) != k_max or not 0 <= k_max <= p - 1:
        raise ParameterError(f"k_max must be an integer in [0, {p - 1}], got {k_max}")
    k_max = int(k_max)
    n1, n2 = bl_split_sizes(n, variant)
    norm = "l11" if variant == "BLa" else "fro"

    risk = np.zeros(k_max + 1)
    for child in np.random.SeedSequence(rng_seed).spawn(int(n_splits)):
        perm = np.random.Generator(np.random.PCG64(child)).permutation(n)
        s1 = sample_covariance(x[perm[:n1]])
        s2 = sample_covariance(x[perm[n1:]])
        risk += bl_risk_curve(s1, s2, k_max, norm)
    risk /= n_splits
    k_hat = int(np.argmin(risk))  # first minimiser, i.e. smallest k on ties
    diag = {
        "risk": risk,
        "n1": n1,
        "n2": n2,
        "n_splits": int(n_splits),
        "k_max": k_max,
        "norm": norm,
        "seed": int(rng_seed),
    }
    return BandwidthEstimate(variant, k_hat, diag)
