"""Unbiased per-lag U-statistics and the bandedness test statistics.

For a lag ``q`` and a column pair ``u = X[:, l]``, ``v = X[:, l + q]`` the
estimator of ``sigma_{l,l+q}^2`` is

    pair / P2 - 2 * triple / P3 + quad / P4

where ``Pb = n! / (n - b)!`` and, with ``a_i = u_i v_i``,

    pair   = sum_{i != j} a_i a_j
    triple = sum_{i, j, k distinct} u_i a_j v_k
    quad   = sum_{i, j, k, m distinct} u_i v_j u_k v_m

Each distinct-index sum is expanded by inclusion-exclusion over the set
partitions of its index tuple (Moebius coefficients ``(-1)^(r-1) (r-1)!`` per
block of size ``r``).  Writing ``S(f) = sum_i f_i``:

    pair   = S(uv)^2 - S(u^2 v^2)

    triple = S(u) S(uv) S(v) - S(u^2 v) S(v) - S(uv)^2 - S(u v^2) S(u)
             + 2 S(u^2 v^2)

    quad   = S(u)^2 S(v)^2 - 4 S(uv) S(u) S(v) - S(u^2) S(v)^2
             - S(v^2) S(u)^2 + 2 S(uv)^2 + S(u^2) S(v^2)
             + 4 S(u^2 v) S(v) + 4 S(u v^2) S(u) - 6 S(u^2 v^2)

All eight moment sums are O(n) per pair, and for every pair at once they are
entries of three Gram-type products (``X'X``, ``(X*X)'X``, ``(X*X)'(X*X)``),
so the full profile costs O(n p^2).  ``lag_profile_bruteforce`` evaluates the
defining sums literally and is kept as the test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.special import ndtr

from .errors import DataError, DegenerateError, ParameterError

__all__ = [
    "DataMatrix",
    "LagProfile",
    "as_data_matrix",
    "lag_profile",
    "lag_profile_bruteforce",
    "w_stat",
    "v_stat",
    "t_stat",
    "p_value",
]

MIN_ROWS = 4

# Upper bound on the number of float64 entries held per block of column pairs.
_BLOCK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x p`` observation matrix; rows are i.i.d. observations."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"data must be two-dimensional, got shape {values.shape}")
        n, p = values.shape
        if n < MIN_ROWS:
            raise DataError(f"n < 4: need at least 4 observations, got {n}")
        if p < 2:
            raise DataError(f"need at least 2 variables, got p = {p}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def as_data_matrix(data) -> DataMatrix:
    if isinstance(data, DataMatrix):
        return data
    return DataMatrix(np.asarray(data, dtype=float))


@dataclass(frozen=True)
class LagProfile:
    """Unbiased per-lag sums of squared covariances.

    ``dhat[q]`` estimates ``D_q = sum_l sigma_{l,l+q}^2``, the squared
    Frobenius mass of the q-th sub-diagonal, for ``q = 0..p-1``.
    """

    n: int
    p: int
    dhat: np.ndarray

    def __post_init__(self):
        dhat = np.asarray(self.dhat, dtype=float)
        if dhat.shape != (self.p,):
            raise ValueError(f"dhat must have length p = {self.p}, got {dhat.shape}")
        object.__setattr__(self, "dhat", dhat)


def _falling(n: int, b: int) -> float:
    return float(math.perm(n, b))


def _canonical_rows(x: np.ndarray) -> np.ndarray:
    # Lexicographic row order makes every reduction over observations
    # independent of how the rows were presented.
    order = np.lexsort(x.T[::-1])
    return x[order]


def _pair_values(xc, q2, s, s2, lo, hi, n):
    """Per-pair estimates for rows ``l in [lo, hi)`` against every column.

    The three expansions are collected by monomial; the terms built only from
    marginal sums factor as ``(S(u)^2 - S(u^2)) (S(v)^2 - S(v^2)) / P4``.
    """
    c2 = 1.0 / _falling(n, 2)
    c3 = 2.0 / _falling(n, 3)
    c4 = 1.0 / _falling(n, 4)
    xb = xc[:, lo:hi]
    qb = q2[:, lo:hi]
    sa = xb.T @ xc          # S(uv)
    su2v = qb.T @ xc        # S(u^2 v)
    suv2 = xb.T @ q2        # S(u v^2)
    su2v2 = qb.T @ q2       # S(u^2 v^2)
    su = s[lo:hi, None]
    sv = s[None, :]

    cross = su2v * sv
    cross += suv2 * su
    cross -= sa * (su * sv)
    out = sa * sa
    out *= c2 + c3 + 2.0 * c4
    out -= (c2 + 2.0 * c3 + 6.0 * c4) * su2v2
    out += (c3 + 4.0 * c4) * cross
    out += c4 * np.outer(s[lo:hi] ** 2 - s2[lo:hi], s**2 - s2)
    return out


def lag_profile(data) -> LagProfile:
    """Compute ``D^_nq`` for every lag ``q = 0..p-1`` in O(n p^2).

    Parameters
    ----------
    data : DataMatrix or array_like
        ``n x p`` observations, ``n >= 4``.

    Returns
    -------
    LagProfile

    Notes
    -----
    Columns are centred first.  The estimator is location invariant, so this
    only improves conditioning.  Sums over ``l`` within a lag use
    ``math.fsum``.
    """
    dm = as_data_matrix(data)
    n, p = dm.n, dm.p
    x = _canonical_rows(dm.values)
    xc = x - x.mean(axis=0)
    q2 = xc * xc
    s = xc.sum(axis=0)
    s2 = q2.sum(axis=0)
    block = max(1, min(p, _BLOCK_ENTRIES // p))
    partials: list[list[float]] = [[] for _ in range(p)]
    for lo in range(0, p, block):
        hi = min(p, lo + block)
        vals = _pair_values(xc, q2, s, s2, lo, hi, n)
        # Shift row l left by l so that column q holds the pair (l, l + q).
        padded = np.zeros((hi - lo, 2 * p))
        padded[:, :p] = vals
        flat = padded.ravel()[lo:]
        by_lag = np.lib.stride_tricks.as_strided(
            flat, shape=(p - lo, hi - lo), strides=(flat.itemsize, (2 * p + 1) * flat.itemsize)
        )
        for q, column in enumerate(by_lag.tolist()):
            partials[q].append(math.fsum(column))
    dhat = np.array([math.fsum(parts) for parts in partials])
    return LagProfile(n=n, p=p, dhat=dhat)


def lag_profile_bruteforce(data) -> LagProfile:
    """Literal evaluation over all tuples of distinct observation indices.

    Cost is O(n^4 p^2); intended for ``n <= 8`` as a reference for
    :func:`lag_profile`.
    """
    dm = as_data_matrix(data)
    x = dm.values
    n, p = dm.n, dm.p
    t2 = np.array(list(permutations(range(n), 2)))
    t3 = np.array(list(permutations(range(n), 3)))
    t4 = np.array(list(permutations(range(n), 4)))
    p2, p3, p4 = _falling(n, 2), _falling(n, 3), _falling(n, 4)

    dhat = np.empty(p)
    for q in range(p):
        u = x[:, : p - q]
        v = x[:, q:]
        a = u * v
        b1 = (a[t2[:, 0]] * a[t2[:, 1]]).sum(axis=0)
        b2 = (u[t3[:, 0]] * a[t3[:, 1]] * v[t3[:, 2]]).sum(axis=0)
        b3 = (u[t4[:, 0]] * v[t4[:, 1]] * u[t4[:, 2]] * v[t4[:, 3]]).sum(axis=0)
        dhat[q] = math.fsum(b1 / p2 - 2.0 * b2 / p3 + b3 / p4)
    return LagProfile(n=n, p=p, dhat=dhat)


def _check_k(profile: LagProfile, k: int) -> int:
    if int(k) != k or not 0 <= k <= profile.p - 1:
        raise ParameterError(f"k must be an integer in [0, {profile.p - 1}], got {k}")
    return int(k)


def w_stat(profile: LagProfile, k: int) -> float:
    """``W_nk = 2 * sum_{q > k} D^_nq``, estimating tr[{Sigma - B_k(Sigma)}^2]."""
    k = _check_k(profile, k)
    return 2.0 * math.fsum(profile.dhat[k + 1:].tolist())


def v_stat(profile: LagProfile, k: int) -> float:
    """``V_nk = D^_n0 + 2 * sum_{1 <= q <= k} D^_nq``, estimating tr[{B_k(Sigma)}^2]."""
    k = _check_k(profile, k)
    return float(profile.dhat[0]) + 2.0 * math.fsum(profile.dhat[1:k + 1].tolist())


def t_stat(w: float, v: float, n: int) -> float:
    """Standardised statistic ``n W / V``; N(0, 4) under the banded null.

    Raises
    ------
    DegenerateError
        If ``v <= 0``, which happens for constant or near-constant data.
    """
    if not (math.isfinite(w) and math.isfinite(v)):
        raise DegenerateError(f"non-finite statistic (W = {w}, V = {v})")
    if v <= 0.0:
        raise DegenerateError(f"V_nk = {v!r} <= 0; data are degenerate for this test")
    return n * w / v


def p_value(t: float) -> float:
    """One-sided upper-tail p-value ``1 - Phi(t / 2)``."""
    if not math.isfinite(t):
        raise ParameterError(f"t must be finite, got {t}")
    # ndtr(-x) avoids the cancellation in 1 - ndtr(x) for large x.
    return float(ndtr(-0.5 * t))
