"""Moving-average data model, its exact population quantities, and the
seeded Monte-Carlo harness for size, power and bandwidth-recovery
studies.

Model: ``X_ij = sum_{l=0}^{k0} gamma_l Z_{i,j+l}`` with i.i.d. standardized
innovations, so ``X_i = Gamma Z_i`` with ``Gamma`` the ``p x (p + k0)`` banded
matrix ``Gamma[j, j + l] = gamma_l`` and ``Sigma`` exactly banded Toeplitz.

Seeding: replication ``r`` of an experiment draws from
``PCG64(SeedSequence(master_seed, spawn_key=(r,)))``, the same stream that
``SeedSequence(master_seed).spawn(reps)[r]`` yields.  Results are stored by
replication index, so they do not depend on thread count or scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import bandwidth as bw
from .bandtest import DEFAULT_ALPHA, default_k_max, run_test, scan
from .errors import ParameterError

__all__ = [
    "InnovationLaw",
    "NORMAL",
    "GAMMA",
    "MAModelSpec",
    "PopulationQuantities",
    "generate",
    "population_sigma",
    "coefficient_matrix",
    "band_profile",
    "population_quantities",
    "replication_rng",
    "Design",
    "PRESETS",
    "make_design",
    "run_experiment",
    "map_replications",
]


@dataclass(frozen=True)
class InnovationLaw:
    """Zero-mean, unit-variance innovation distribution.

    ``excess_kurtosis`` is ``E z^4 - 3`` and ``skewness`` is ``E z^3``.
    The standardized Gamma(1, 0.5) law is ``(E - 0.5) / 0.5`` with
    ``E ~ Gamma(shape=1, scale=0.5)``, i.e. ``Exp(1) - 1``; shape 1 makes the
    scale/rate reading irrelevant after standardization.
    """

    kind: str
    shape: float = 1.0
    scale: float = 0.5

    def __post_init__(self):
        if self.kind not in ("normal", "gamma"):
            raise ParameterError(f"innovation must be 'normal' or 'gamma', got {self.kind!r}")

    @property
    def excess_kurtosis(self) -> float:
        return 0.0 if self.kind == "normal" else 6.0 / self.shape

    @property
    def skewness(self) -> float:
        return 0.0 if self.kind == "normal" else 2.0 / math.sqrt(self.shape)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "normal":
            return rng.standard_normal(size)
        mean = self.shape * self.scale
        sd = math.sqrt(self.shape) * self.scale
        return (rng.gamma(self.shape, self.scale, size) - mean) / sd


NORMAL = InnovationLaw("normal")
GAMMA = InnovationLaw("gamma")


def innovation_law(name) -> InnovationLaw:
    if isinstance(name, InnovationLaw):
        return name
    return InnovationLaw(str(name).lower())


@dataclass(frozen=True)
class MAModelSpec:
    gammas: tuple
    n: int
    p: int
    innovation: InnovationLaw = NORMAL
    seed: int = 0

    def __post_init__(self):
        g = tuple(float(v) for v in np.atleast_1d(self.gammas))
        if not g or not all(math.isfinite(v) for v in g):
            raise ParameterError("gammas must be a non-empty vector of finite values")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "innovation", innovation_law(self.innovation))
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if int(self.p) != self.p or self.p < 1:
            raise ParameterError(f"p must be a positive integer, got {self.p}")

    @property
    def k0(self) -> int:
        return len(self.gammas) - 1


def replication_rng(master_seed: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(rep),))
    return np.random.Generator(np.random.PCG64(ss))


def generate(spec: MAModelSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw an ``n x p`` sample from the MA model.

    Each row uses its own length ``p + k0`` innovation vector.  With ``rng``
    omitted the generator is seeded from ``spec.seed``.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(spec.seed))))
    n, p, k0 = spec.n, spec.p, spec.k0
    z = spec.innovation.sample(rng, (n, p + k0))
    x = np.zeros((n, p))
    for lag, g in enumerate(spec.gammas):
        x += g * z[:, lag:lag + p]
    return x


def band_profile(gammas) -> np.ndarray:
    """Autocovariances ``gamma(q) = sum_l gamma_l gamma_{l+q}``, ``q = 0..k0``."""
    g = np.asarray(gammas, dtype=float)
    k0 = g.size - 1
    return np.array([math.fsum((g[: g.size - q] * g[q:]).tolist()) for q in range(k0 + 1)])


def coefficient_matrix(spec: MAModelSpec, sparse: bool = False):
    """``Gamma`` with ``Gamma[j, j + l] = gamma_l`` (shape ``p x (p + k0)``)."""
    p, k0 = spec.p, spec.k0
    gam = sp.diags(list(spec.gammas), offsets=list(range(k0 + 1)), shape=(p, p + k0), format="csr")
    return gam if sparse else gam.toarray()


def population_sigma(spec: MAModelSpec, sparse: bool = False):
    """Banded Toeplitz covariance with ``sigma_{j, j+q} = gamma(q)``."""
    p = spec.p
    prof = band_profile(spec.gammas)
    qs = [q for q in range(len(prof)) if q < p]
    if not qs:
        qs = [0]
    offsets = [0] + [s * q for q in qs[1:] for s in (1, -1)]
    values = [prof[0]] + [prof[q] for q in qs[1:] for _ in (1, -1)]
    sigma = sp.diags(values, offsets=offsets, shape=(p, p), format="csr")
    return sigma if sparse else sigma.toarray()


@dataclass(frozen=True)
class PopulationQuantities:
    """Exact population quantities of the MA model for ``k = 0..k_max``."""

    band_profile: np.ndarray
    tr_sigma2: float
    tr_bk2: np.ndarray
    r: np.ndarray
    one_minus_r: np.ndarray
    signal: np.ndarray
    nu: np.ndarray
    delta_snr: np.ndarray
    tr_ratio: float
    a_np: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            name: (val.tolist() if isinstance(val, np.ndarray) else val)
            for name, val in self.__dict__.items()
        }


def _trace_sq(a) -> float:
    """tr(A A) for a sparse matrix."""
    return float(a.multiply(a.T).sum())


def population_quantities(spec: MAModelSpec, k_max: int | None = None) -> PopulationQuantities:
    """Closed-form traces, ``r_k``, the leading standard deviation ``nu_nk`` of
    ``W_nk`` and the signal-to-noise ratio ``delta_nk``.

    ``nu_nk^2 = 4 tr^2(S^2) / n^2 + 8 tr[{S (S - B_k S)}^2] / n
    + 4 Delta tr[G'(S - B_k S)G o G'(S - B_k S)G] / n`` is assembled from
    sparse banded products.
    """
    p, n = spec.p, spec.n
    if k_max is None:
        k_max = p - 1
    if int(k_max) != k_max or not 0 <= k_max <= p - 1:
        raise ParameterError(f"k_max must be an integer in [0, {p - 1}], got {k_max}")
    k_max = int(k_max)
    prof = band_profile(spec.gammas)
    lagged = [prof[0] ** 2 * p] + [2.0 * (p - q) * prof[q] ** 2 for q in range(1, min(len(prof), p))]
    tr_sigma2 = math.fsum(lagged)
    tr_bk2 = np.array([math.fsum(lagged[: k + 1]) for k in range(k_max + 1)])
    signal = np.array([math.fsum(lagged[k + 1:]) for k in range(k_max + 1)])
    r = tr_bk2 / tr_sigma2
    one_minus_r = signal / tr_sigma2

    sigma = population_sigma(spec, sparse=True)
    gam = coefficient_matrix(spec, sparse=True)
    sigma2 = sigma @ sigma
    tr_ratio = float(sigma2.multiply(sigma2).sum()) / tr_sigma2**2
    excess = spec.innovation.excess_kurtosis

    nu = np.empty(k_max + 1)
    for k in range(k_max + 1):
        if signal[k] == 0.0:
            nu[k] = 2.0 * tr_sigma2 / n
            continue
        off = sp.triu(sigma, k + 1) + sp.tril(sigma, -(k + 1))
        prod = (sigma @ off).tocsr()
        nu2 = 4.0 / n**2 * tr_sigma2**2 + 8.0 / n * _trace_sq(prod)
        if excess != 0.0:
            inner = (gam.T @ off @ gam).diagonal()
            nu2 += 4.0 / n * excess * float(inner @ inner)
        nu[k] = math.sqrt(nu2)
    delta_snr = signal / nu
    ks = np.arange(k_max + 1)
    a_np = 1.0 / n**2 + ks**2 / (n * p)
    return PopulationQuantities(
        band_profile=prof,
        tr_sigma2=tr_sigma2,
        tr_bk2=tr_bk2,
        r=r,
        one_minus_r=one_minus_r,
        signal=signal,
        nu=nu,
        delta_snr=delta_snr,
        tr_ratio=tr_ratio,
        a_np=a_np,
    )


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------

BANDWIDTH5 = (1.0,) + (0.4,) * 5

# preset -> (gammas, kind, tested k).  "size"/"power" presets run the test at
# the tested k; "bandwidth" presets run the estimators.
PRESETS = {
    "table1a": ((1.0,), "size", 0),
    "table1b": ((1.0, 1.0), "size", 1),
    "table1b_half": ((1.0, 0.5), "size", 1),
    "table1c": ((1.0, 1.0, 1.0), "size", 2),
    "table1c_small": ((1.0, 0.5, 0.25), "size", 2),
    "table1d": (BANDWIDTH5, "size", 5),
    "table2a": ((1.0, 1.0, 1.0), "power", 1),
    "table2a_small": ((1.0, 0.5, 0.25), "power", 1),
    "table2b": (BANDWIDTH5, "power", 4),
    "table3_bw3": ((1.0, 1.0, 1.0, 1.0), "bandwidth", None),
    "table3_bw5": (BANDWIDTH5, "bandwidth", None),
    "table3_bw10": ((1.0,) + (0.2,) * 5 + (0.4,) * 5, "bandwidth", None),
    "table3_bw15": ((1.0,) + (0.2,) * 10 + (0.4,) * 5, "bandwidth", None),
}

ESTIMATORS = ("fixed", "changepoint", "bl-a", "bl-b")


@dataclass(frozen=True)
class Design:
    """One Monte-Carlo cell: a data model plus what to compute on each draw."""

    gammas: tuple
    n: int
    p: int
    kind: str = "size"
    k: int | None = None
    innovation: str = "normal"
    reps: int = 1000
    alpha: float = DEFAULT_ALPHA
    delta: float = bw.DEFAULT_DELTA
    theta: float = bw.DEFAULT_THETA
    span: float = bw.DEFAULT_SPAN
    n_splits: int = bw.DEFAULT_SPLITS
    k_max: int | None = None
    methods: tuple = ("fixed", "changepoint")
    master_seed: int = 0
    preset: str | None = None

    def __post_init__(self):
        if self.kind not in ("size", "power", "bandwidth"):
            raise ParameterError(f"unknown experiment kind {self.kind!r}")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ParameterError(f"replication count must be >= 1, got {self.reps}")
        if self.kind != "bandwidth" and self.k is None:
            raise ParameterError("a size/power design needs the tested bandwidth k")
        unknown = set(self.methods) - set(ESTIMATORS)
        if unknown:
            raise ParameterError(f"unknown estimator(s): {sorted(unknown)}")

    def model(self) -> MAModelSpec:
        return MAModelSpec(self.gammas, self.n, self.p, innovation_law(self.innovation), self.master_seed)


def make_design(preset: str | None = None, **overrides) -> Design:
    """Build a design from a named preset, letting keyword arguments override it."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if preset is None:
        return Design(**overrides)
    if preset not in PRESETS:
        raise ParameterError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    gammas, kind, k = PRESETS[preset]
    base = {"gammas": gammas, "kind": kind, "k": k, "preset": preset}
    base.update(overrides)
    if "n" not in base or "p" not in base:
        raise ParameterError("a design needs n and p")
    return Design(**base)


def _one_test(design: Design, rep: int) -> tuple:
    x = generate(design.model(), replication_rng(design.master_seed, rep))
    res = run_test(x, design.k, design.alpha)
    return res.t, res.p_value, res.reject


def _one_bandwidth(design: Design, rep: int) -> dict:
    rng = replication_rng(design.master_seed, rep)
    x = generate(design.model(), rng)
    out = {}
    needs_scan = {"fixed", "changepoint"} & set(design.methods)
    if needs_scan:
        k_max = design.k_max if design.k_max is not None else default_k_max(design.n, design.p)
        sc = scan(x, k_max, design.alpha)
        if "fixed" in design.methods:
            est = bw.fixed_threshold_estimator(bw.diff_sequence(sc, design.delta), design.theta)
            out["fixed"] = est.k_hat
        if "changepoint" in design.methods:
            dseq, cands = bw.change_point_inputs(sc)
            out["changepoint"] = bw.change_point_estimator(dseq, cands, design.span).k_hat
    # BL splits get their own stream derived from the replication seed.
    bl_seed = int(rng.integers(0, 2**63 - 1))
    for method, variant in (("bl-a", "BLa"), ("bl-b", "BLb")):
        if method in design.methods:
            out[method] = bw.bl_bandwidth(x, variant, design.n_splits, None, bl_seed).k_hat
    return out


def map_replications(func, design: Design, threads: int | None):
    """``[func(design, r) for r in range(design.reps)]``, optionally on a thread pool.

    Each replication draws from its own seeded stream, so the result list does
    not depend on ``threads``; ``0`` means every available core.
    """
    reps = range(int(design.reps))
    if threads is None:
        threads = 1
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads <= 1:
        return [func(design, r) for r in reps]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: func(design, r), reps))


def run_experiment(design: Design, threads: int | None = 1) -> dict:
    """Run all replications of ``design`` and summarise them.

    ``threads=0`` uses every available core.  Size/power designs report the
    rejection frequency with its binomial standard error and the moments of
    ``T/2``; bandwidth designs report, per estimator, the mean bias, its
    standard deviation (``ddof=1``) and the share of exact recoveries.
    """
    summary = {
        "preset": design.preset,
        "kind": design.kind,
        "n": design.n,
        "p": design.p,
        "gammas": list(design.gammas),
        "innovation": design.innovation,
        "reps": int(design.reps),
        "master_seed": int(design.master_seed),
    }
    reps = int(design.reps)
    if design.kind in ("size", "power"):
        rows = map_replications(_one_test, design, threads)
        t = np.array([r[0] for r in rows])
        rejects = np.array([r[2] for r in rows], dtype=float)
        freq = float(rejects.mean())
        half_t = t / 2.0
        summary.update(
            k=int(design.k),
            alpha=design.alpha,
            rejection_rate=freq,
            rejection_se=math.sqrt(freq * (1.0 - freq) / reps),
            mean_half_t=float(half_t.mean()),
            var_half_t=float(half_t.var(ddof=1)) if reps > 1 else 0.0,
            t=t.tolist(),
        )
        return summary

    k0 = len(design.gammas) - 1
    rows = map_replications(_one_bandwidth, design, threads)
    methods = {}
    for m in design.methods:
        khat = [r[m] for r in rows]
        found = np.array([k for k in khat if k is not None], dtype=float)
        bias = found - k0
        methods[m] = {
            "k_hat": khat,
            "no_crossing": sum(k is None for k in khat),
            "mean_bias": float(bias.mean()) if bias.size else float("nan"),
            "sd": float(bias.std(ddof=1)) if bias.size > 1 else 0.0,
            "bias_se": float(bias.std(ddof=1) / math.sqrt(bias.size)) if bias.size > 1 else 0.0,
            "exact": int(np.sum(found == k0)),
        }
    summary.update(true_bandwidth=k0, delta=design.delta, theta=design.theta,
                   span=design.span, n_splits=design.n_splits, methods=methods)
    return summary


def with_seed(design: Design, master_seed: int) -> Design:
    return replace(design, master_seed=int(master_seed))
