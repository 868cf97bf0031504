"""Command-line front end.

    bandcov test      --input data.csv --k 2
    bandcov scan      --input data.csv --k-max 40 --format csv
    bandcov bandwidth --input data.csv --method changepoint
    bandcov profile   --input data.csv
    bandcov simulate  --preset table1a --n 40 --p 100 --reps 1000

Rows of the input CSV are observations, columns are variables; there is no
transpose option.  Settings may also come from a flat ``key = value`` file
given by ``--config``; command-line flags take precedence over it.

Exit status: 0 success, 2 usage error, 3 data error, 4 degenerate data
(the statistic is undefined).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import bandwidth as bw
from .bandtest import DEFAULT_ALPHA, default_k_max, scan, test_from_profile
from .errors import DataError, DegenerateError, ParameterError
from .io import ingest_csv, to_csv, to_json
from .simgen import PRESETS, make_design, run_experiment
from .ustat import lag_profile

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4

COMMANDS = ("test", "scan", "bandwidth", "simulate", "profile")
METHODS = {"fixed": "FixedThreshold", "changepoint": "ChangePoint", "bl-a": "BLa", "bl-b": "BLb"}

SCAN_COLUMNS = ["k", "W", "V", "T", "p_value", "tilde_t", "d_nk"]
TEST_COLUMNS = ["k", "w", "v", "t", "p_value", "reject", "alpha"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Every setting a command can use, with its default."""

    command: str = "test"
    input: str | None = None
    header: bool = False
    k: int | None = None
    k_max: int | None = None
    alpha: float = DEFAULT_ALPHA
    method: str | None = None
    delta: float = bw.DEFAULT_DELTA
    theta: float = bw.DEFAULT_THETA
    span: float = bw.DEFAULT_SPAN
    splits: int = bw.DEFAULT_SPLITS
    seed: int = 0
    threads: int = 1
    format: str = "json"
    output: str | None = None
    preset: str | None = None
    reps: int | None = None
    n: int | None = None
    p: int | None = None
    gammas: tuple | None = None
    innovation: str | None = None


_CONVERTERS = {
    "header": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
    "k": int, "k_max": int, "alpha": float, "delta": float, "theta": float,
    "span": float, "splits": int, "seed": int, "threads": int, "reps": int,
    "n": int, "p": int,
    "gammas": lambda s: tuple(float(v) for v in str(s).replace(",", " ").split()),
}
# Config-file spellings that map onto RunConfig fields.
_ALIASES = {"master_seed": "seed", "n_splits": "splits", "k-max": "k_max"}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    known = {f.name for f in fields(RunConfig)} - {"command"}
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in known:
            raise UsageError(f"{path}:{line_no}: unknown key {key!r}")
        try:
            out[key] = _CONVERTERS.get(key, str)(value)
        except ValueError:
            raise UsageError(f"{path}:{line_no}: bad value {value!r} for {key}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--input", help="CSV file, rows = observations")
    common.add_argument("--header", action="store_const", const=True, default=None,
                        help="skip the first CSV row")
    common.add_argument("--k", type=int, help="bandwidth under the null")
    common.add_argument("--k-max", dest="k_max", type=int, help="largest bandwidth scanned")
    common.add_argument("--alpha", type=float, help="test level (default 0.05)")
    common.add_argument("--method", choices=sorted(METHODS) + ["all"],
                        help="bandwidth estimator (fixed); 'all' only for simulate")
    common.add_argument("--delta", type=float, help="exponent of the n**delta scaling (0.5)")
    common.add_argument("--theta", type=float, help="threshold of the fixed estimator (0.06)")
    common.add_argument("--span", type=float, help="local-fit span for changepoint (0.75)")
    common.add_argument("--splits", type=int, help="number of random splits for bl-a/bl-b (50)")
    common.add_argument("--seed", type=int, help="master seed (0)")
    common.add_argument("--threads", type=int, help="worker threads; 0 = all cores (1)")
    common.add_argument("--format", choices=["json", "csv"], help="output format (json)")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--preset", help="simulation preset: " + ", ".join(sorted(PRESETS)))
    common.add_argument("--reps", type=int, help="Monte-Carlo replications")
    common.add_argument("--n", type=int, help="simulated sample size")
    common.add_argument("--p", type=int, help="simulated dimension")
    common.add_argument("--gammas", type=_CONVERTERS["gammas"],
                        help="MA coefficients, e.g. '1,0.4,0.4'")
    common.add_argument("--innovation", choices=["normal", "gamma"])

    parser = argparse.ArgumentParser(
        prog="bandcov", description="Bandedness test and bandwidth estimation for covariances."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("test", parents=[common], help="test H0: Sigma = B_k(Sigma)")
    sub.add_parser("scan", parents=[common], help="test every k = 0..k_max")
    sub.add_parser("bandwidth", parents=[common], help="estimate the bandwidth")
    sub.add_parser("profile", parents=[common], help="per-lag estimates D_q")
    sub.add_parser("simulate", parents=[common], help="run a Monte-Carlo design")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    settings = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            settings[f.name] = value
    if "method" in settings and settings["method"] not in (*METHODS, "all"):
        raise UsageError(f"invalid method {settings['method']!r}; choose from {sorted(METHODS)}")
    if settings.get("format", "json") not in ("json", "csv"):
        raise UsageError(f"invalid format {settings['format']!r}")
    return RunConfig(**settings)


def _load(cfg: RunConfig):
    if not cfg.input:
        raise UsageError(f"'{cfg.command}' needs --input")
    return ingest_csv(cfg.input, cfg.header)


def _emit(cfg: RunConfig, payload, records=None, columns=None) -> str:
    if cfg.format == "csv":
        return to_csv(records if records is not None else [payload], columns)
    return to_json(payload)


def cmd_test(cfg: RunConfig) -> str:
    data = _load(cfg)
    if cfg.k is None:
        raise UsageError("'test' needs --k")
    res = test_from_profile(lag_profile(data), cfg.k, cfg.alpha)
    return _emit(cfg, res.as_dict(), columns=TEST_COLUMNS)


def scan_records(sc, delta: float) -> list[dict]:
    d = bw.diff_sequence(sc, delta).values
    records = []
    for res, tt in zip(sc.results, sc.tilde_t):
        records.append({
            "k": res.k, "W": res.w, "V": res.v, "T": res.t, "p_value": res.p_value,
            "tilde_t": float(tt), "d_nk": float(d[res.k]) if res.k < d.size else None,
        })
    return records


def cmd_scan(cfg: RunConfig) -> str:
    data = _load(cfg)
    sc = scan(data, cfg.k_max, cfg.alpha)
    records = scan_records(sc, cfg.delta)
    payload = {"n": data.n, "p": data.p, "alpha": cfg.alpha, "delta": cfg.delta,
               "records": records}
    return _emit(cfg, payload, records, SCAN_COLUMNS)


def estimate(data, cfg: RunConfig) -> bw.BandwidthEstimate:
    """Dispatch to the estimator named by ``cfg.method`` (shared with tests)."""
    method = cfg.method or "fixed"
    if method in ("fixed", "changepoint"):
        k_max = cfg.k_max if cfg.k_max is not None else default_k_max(data.n, data.p)
        sc = scan(data, k_max, cfg.alpha)
        if method == "fixed":
            return bw.fixed_threshold_estimator(bw.diff_sequence(sc, cfg.delta), cfg.theta)
        dseq, cands = bw.change_point_inputs(sc)
        return bw.change_point_estimator(dseq, cands, cfg.span)
    return bw.bl_bandwidth(data, METHODS[method], cfg.splits, cfg.k_max, cfg.seed)


def cmd_bandwidth(cfg: RunConfig) -> str:
    if cfg.method == "all":
        raise UsageError("'bandwidth' takes a single --method")
    cfg.method = cfg.method or "fixed"
    data = _load(cfg)
    est = estimate(data, cfg)
    payload = est.as_dict()
    return _emit(cfg, payload, [payload], ["method", "status", "k_hat"])


def cmd_profile(cfg: RunConfig) -> str:
    data = _load(cfg)
    prof = lag_profile(data)
    records = [{"q": q, "dhat": float(v)} for q, v in enumerate(prof.dhat)]
    payload = {"n": prof.n, "p": prof.p, "dhat": prof.dhat}
    return _emit(cfg, payload, records, ["q", "dhat"])


SIZE_COLUMNS = ["preset", "kind", "n", "p", "innovation", "reps", "k", "alpha",
                "rejection_rate", "rejection_se", "mean_half_t", "var_half_t", "master_seed"]
BANDWIDTH_COLUMNS = ["preset", "n", "p", "innovation", "reps", "true_bandwidth", "method",
                     "mean_bias", "sd", "bias_se", "exact", "no_crossing", "master_seed"]


def cmd_simulate(cfg: RunConfig) -> str:
    if cfg.preset is None and cfg.gammas is None:
        raise UsageError("'simulate' needs --preset or --gammas")
    if cfg.reps is not None and cfg.reps < 1:
        raise UsageError(f"replication count must be >= 1, got {cfg.reps}")
    if cfg.n is None or cfg.p is None:
        raise UsageError("'simulate' needs --n and --p")
    overrides = dict(n=cfg.n, p=cfg.p, reps=cfg.reps, alpha=cfg.alpha, delta=cfg.delta,
                     theta=cfg.theta, span=cfg.span, n_splits=cfg.splits,
                     master_seed=cfg.seed, innovation=cfg.innovation, gammas=cfg.gammas,
                     k=cfg.k, k_max=cfg.k_max)
    if cfg.preset is None:
        overrides["kind"] = "size" if cfg.k is not None else "bandwidth"
    if cfg.method is not None:
        overrides["methods"] = tuple(METHODS) if cfg.method == "all" else (cfg.method,)
    try:
        design = make_design(cfg.preset, **overrides)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None
    summary = run_experiment(design, threads=cfg.threads)
    summary.pop("t", None)
    if summary["kind"] == "bandwidth":
        rows = [{**summary, "method": m, **{k: v for k, v in stats.items() if k != "k_hat"}}
                for m, stats in summary["methods"].items()]
        return _emit(cfg, summary, rows, BANDWIDTH_COLUMNS)
    return _emit(cfg, summary, [summary], SIZE_COLUMNS)


HANDLERS = {
    "test": cmd_test,
    "scan": cmd_scan,
    "bandwidth": cmd_bandwidth,
    "profile": cmd_profile,
    "simulate": cmd_simulate,
}


def run(argv=None) -> tuple[int, str, str]:
    """Execute a command; returns ``(exit_status, stdout_text, stderr_text)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), "", ""
    try:
        cfg = resolve_config(args)
        cfg.command = args.command
        text = HANDLERS[args.command](cfg)
    except UsageError as exc:
        return EXIT_USAGE, "", f"usage error: {exc}\n"
    except DataError as exc:
        return EXIT_DATA, "", f"data error: {exc}\n"
    except DegenerateError as exc:
        return EXIT_DEGENERATE, "", f"degenerate data: {exc}\n"
    except ParameterError as exc:
        return EXIT_USAGE, "", f"usage error: {exc}\n"
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
        return EXIT_OK, "", ""
    return EXIT_OK, text, ""


def main(argv=None) -> int:
    status, out, err = run(argv)
    if out:
        sys.stdout.write(out)
    if err:
        sys.stderr.write(err)
    return status


if __name__ == "__main__":
    sys.exit(main())
