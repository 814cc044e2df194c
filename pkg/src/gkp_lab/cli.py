"""``gkp-lab`` command line interface.

Exit codes: 0 success, 2 usage error, 3 infeasible or empty result,
4 Monte Carlo validation failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import re
import sys
from typing import Any, Sequence

from . import __version__
from .bell_mc import (
    Estimate,
    estimate_clip,
    estimate_gec,
    estimate_link,
    estimate_physical_bsm,
    wrapped_residual_variance,
)
from .cbsm_code import (
    Detector,
    LinkBudget,
    ParityCode,
    SearchSpace,
    evaluate,
    letter_failure,
    cbsm_success,
    optimize,
    reference_search_space,
    result_to_dict,
)
from .errors import (
    DomainError,
    EmptyFeasibleSetError,
    InfeasiblePNRDError,
    NoPositiveRateError,
)
from .gkp_stats import (
    HALF_BIN,
    SQRT_PI,
    ClipPolicy,
    SqueezingSpec,
    clip_conditional_error,
    clip_correct,
    clip_incorrect,
    clip_success,
)
from .repeater_protocols import (
    Protocol,
    ProtocolConfig,
    sweep_distance,
    waterfall_distance,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_VALIDATION = 4

SCHEMA_VERSION = 1
Z_LIMIT = 4.0
# the GEC check uses the low-noise point where wrapping is negligible
MC_DEFAULT_DB = {"clip": 12.0, "bsm": 12.0, "gec": 15.0, "link": 15.0}

_SYMBOLIC_MU = re.compile(r"^\s*(\d*(?:\.\d*)?)\s*\*?\s*sqrt_pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


class UsageError(Exception):
    pass


def parse_mu_up(text: str) -> float:
    """Parse ``0``, ``sqrt_pi/10``, ``3sqrt_pi/16`` or a plain decimal."""
    raw = str(text).strip()
    match = _SYMBOLIC_MU.match(raw)
    try:
        if match:
            coef = float(match.group(1)) if match.group(1) else 1.0
            denom = float(match.group(2)) if match.group(2) else 1.0
            value = coef * SQRT_PI / denom
        else:
            value = float(raw)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a clipping threshold") from None
    if not math.isfinite(value) or not (0.0 <= value < HALF_BIN):
        raise argparse.ArgumentTypeError(
            f"{text!r} = {value!r} is outside [0, sqrt(pi)/2)"
        )
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _int_pair(text: str) -> tuple[int, int]:
    parts = [p for p in re.split(r"[,:\s]+", str(text).strip()) if p]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _float_pair(text: str) -> tuple[float, float]:
    parts = [p for p in re.split(r"[,:\s]+", str(text).strip()) if p]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _int_set(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in re.split(r"[,\s]+", str(text).strip()) if p)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# output


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def render_csv(meta: dict[str, Any], columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}={json.dumps(_clean(value), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def render_json(doc: dict[str, Any]) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _meta(args: argparse.Namespace, command: str, **extra: Any) -> dict[str, Any]:
    inputs = {
        k: v
        for k, v in sorted(vars(args).items())
        if not k.startswith("_") and k not in ("out", "format", "deterministic", "config")
    }
    meta: dict[str, Any] = {"tool": "gkp-lab", "version": __version__, "command": command}
    meta["inputs"] = inputs
    meta.update(extra)
    if not args.deterministic:
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _clip(args: argparse.Namespace) -> ClipPolicy:
    return ClipPolicy(args.mu_up)


def _squeezing(args: argparse.Namespace) -> SqueezingSpec:
    return SqueezingSpec.from_db(args.squeezing_db)


# ---------------------------------------------------------------------------
# commands


def _protocol_config(args: argparse.Namespace) -> ProtocolConfig:
    return ProtocolConfig(Protocol(args.protocol), args.mqr, _squeezing(args), _clip(args))


def cmd_keyrate(args: argparse.Namespace) -> int:
    config = _protocol_config(args)
    if args.step_km <= 0.0:
        raise UsageError("--step-km must be positive")
    max_km = args.max_km
    if max_km is None:
        base = ProtocolConfig(Protocol.I, args.mqr, config.squeezing)
        try:
            max_km = 2.0 * waterfall_distance(base)
        except NoPositiveRateError:
            max_km = 1.0
    if max_km <= 0.0:
        raise UsageError("--max-km must be positive")
    count = max(1, int(round(max_km / args.step_km)))
    grid = [k * args.step_km for k in range(count)]
    points = sweep_distance(config, grid)
    columns = ["distance_km", "kappa", "e_ab_x", "e_ab_z", "p_suc_total"]
    rows = [[p.total_km, p.kappa, p.e_ab_x, p.e_ab_z, p.p_suc_total] for p in points]
    meta = _meta(args, "keyrate", max_km_resolved=max_km, rows=len(rows))
    if args.format == "json":
        _emit(args, render_json({"schema": SCHEMA_VERSION, "meta": meta, "columns": columns, "rows": rows}))
    else:
        _emit(args, render_csv(meta, columns, rows))
    if args.require_positive and not any(p.kappa > 0.0 for p in points):
        print("error: no grid point has a positive key rate", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_waterfall(args: argparse.Namespace) -> int:
    config = _protocol_config(args)
    try:
        distance = waterfall_distance(config, args.kappa_floor, args.resolution_km)
    except NoPositiveRateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    meta = _meta(args, "waterfall")
    if args.format == "json":
        _emit(args, render_json({"schema": SCHEMA_VERSION, "meta": meta, "waterfall_km": distance}))
    else:
        _emit(args, render_csv(meta, ["protocol", "mqr", "waterfall_km"], [[args.protocol, args.mqr, distance]]))
    return EXIT_OK


def _result_doc(args: argparse.Namespace, command: str, body: dict[str, Any], **extra: Any) -> dict[str, Any]:
    doc = {"schema": SCHEMA_VERSION, "meta": _meta(args, command, **body.pop("meta"))}
    doc.update(body)
    doc.update(extra)
    return doc


def _flat_result(body: dict[str, Any]) -> tuple[list[str], list[Any]]:
    cols = list(body["params"]) + list(body["performance"])
    vals = list(body["params"].values()) + list(body["performance"].values())
    return cols, vals


def cmd_cbsm_eval(args: argparse.Namespace) -> int:
    for name in ("n", "m", "l0_km"):
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")
    code = ParityCode(args.n, args.m, args.j)
    link = LinkBudget(args.eta0, args.l0_km)
    try:
        perf = evaluate(code, link, args.total_km, _squeezing(args), _clip(args), args.detector)
    except InfeasiblePNRDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    body = result_to_dict(
        code, link, perf, detector=args.detector, squeezing=_squeezing(args), clip=_clip(args), total_km=args.total_km
    )
    if args.format == "csv":
        cols, vals = _flat_result(body)
        _emit(args, render_csv(_meta(args, "cbsm eval", **body["meta"]), cols, [vals]))
    else:
        _emit(args, render_json(_result_doc(args, "cbsm eval", body)))
    return EXIT_OK


def _search_space(args: argparse.Namespace) -> SearchSpace:
    ranges = (args.j_set, args.m_range, args.n_range, args.l0_range_km)
    if all(r is None for r in ranges):
        return reference_search_space(args.eta0)
    if any(r is None for r in ranges):
        raise UsageError("--j-set, --m-range, --n-range and --l0-range-km must be given together")
    return SearchSpace(args.j_set, args.m_range, args.n_range, args.l0_range_km, args.l0_step_km)


def cmd_cbsm_optimize(args: argparse.Namespace) -> int:
    space = _search_space(args)
    try:
        result = optimize(
            space, args.total_km, args.eta0, _squeezing(args), _clip(args), args.detector, trace=args.trace
        )
    except EmptyFeasibleSetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    body = result_to_dict(
        result.code,
        result.link,
        result.performance,
        detector=args.detector,
        squeezing=_squeezing(args),
        clip=_clip(args),
        total_km=args.total_km,
    )
    search = {
        "j_set": list(space.j_set),
        "m_range": list(space.m_range),
        "n_range": list(space.n_range),
        "l0_range_km": list(space.l0_range_km),
        "l0_step_km": space.l0_step_km,
        "evaluated": result.evaluated,
        "feasible": result.feasible,
    }
    if args.format == "csv":
        cols, vals = _flat_result(body)
        _emit(args, render_csv(_meta(args, "cbsm optimize", search=search, **body["meta"]), cols, [vals]))
        return EXIT_OK
    meta = body.pop("meta")
    doc = {
        "schema": SCHEMA_VERSION,
        "meta": _meta(args, "cbsm optimize", search=search, **meta),
        "best": body,
    }
    if args.trace:
        doc["trace"] = result.trace
    _emit(args, render_json(doc))
    return EXIT_OK


def _check_row(
    name: str, analytic: float, mean: float, stderr: float, trials: int | None = None
) -> dict[str, Any]:
    """One report line; proportions (``trials`` given) are scored with the null-hypothesis stderr."""
    diff = mean - analytic
    if trials is not None and 0.0 < analytic < 1.0:
        z = diff / math.sqrt(analytic * (1.0 - analytic) / trials)
    elif stderr > 0.0:
        z = diff / stderr
    else:
        z = 0.0 if abs(diff) <= 1e-15 else math.copysign(math.inf, diff)
    return {"quantity": name, "analytic": analytic, "empirical": mean, "stderr": stderr, "z": z}


def _est(e: Estimate) -> tuple[float, float, int]:
    return e.mean, e.stderr, e.trials


def _mc_checks(args: argparse.Namespace) -> list[dict[str, Any]]:
    clip = _clip(args)
    syndrome_var = 2.0 * _squeezing(args).variance if args.variance is None else args.variance
    if args.target == "clip":
        est = estimate_clip(syndrome_var, clip, args.trials, args.seed, chunk_size=args.chunk_size)
        rows = [
            _check_row("clip_success", clip_success(syndrome_var, clip), *_est(est.success)),
            _check_row("clip_correct", clip_correct(syndrome_var, clip), *_est(est.correct)),
            _check_row("clip_incorrect", clip_incorrect(syndrome_var, clip), *_est(est.incorrect)),
        ]
        if est.success.mean > 0.0:
            rows.append(
                _check_row(
                    "clip_conditional_error",
                    clip_conditional_error(syndrome_var, clip),
                    *_est(est.conditional_error),
                )
            )
        return rows
    if args.target == "bsm":
        eta = args.eta_prod
        est = estimate_physical_bsm(syndrome_var, clip, args.trials, args.seed, eta, chunk_size=args.chunk_size)
        c = clip_correct(syndrome_var, clip)
        i = clip_incorrect(syndrome_var, clip)
        expected = {
            "success": eta * c * c,
            "x": eta * i * c,
            "z": eta * c * i,
            "y": eta * i * i,
            "fail": 1.0 - eta * (c + i) ** 2,
        }
        rows = []
        for name, value in expected.items():
            f = est.frequency(name)
            rows.append(_check_row(f"bsm_{name}", value, *_est(f)))
        so = Estimate.from_counts(est.sign_only, est.trials)
        rows.append(_check_row("bsm_sign_only", eta * (1.0 - c - i) * (c + i), *_est(so)))
        return rows
    if args.target == "gec":
        sigma2 = _squeezing(args).variance if args.variance is None else args.variance
        est = estimate_gec(sigma2, args.trials, args.seed, chunk_size=args.chunk_size)
        return [
            _check_row("gec_residual_variance", 2.0 * sigma2, est.residual_variance, est.stderr),
            _check_row(
                "gec_residual_variance_wrapped",
                wrapped_residual_variance(sigma2),
                est.residual_variance,
                est.stderr,
            ),
            _check_row("gec_skewness", 0.0, est.skewness, est.skewness_stderr),
        ]
    # link: pure-loss CBSM, where the analytic success probability is exact
    code = ParityCode(args.n, args.m, 0)
    eta = args.eta_prod
    analytic = cbsm_success(eta**code.m, letter_failure(eta, code), code.n)
    est = estimate_link(code.n, code.m, eta, args.trials, args.seed, chunk_size=args.chunk_size)
    return [_check_row("cbsm_success", analytic, *_est(est.success))]


def cmd_mc_validate(args: argparse.Namespace) -> int:
    if args.target == "link" and args.trials < 10_000:
        raise UsageError("--trials must be >= 10000 for --target link")
    rows = _mc_checks(args)
    passed = all(abs(r["z"]) <= Z_LIMIT for r in rows)
    meta = _meta(args, "mc-validate", z_limit=Z_LIMIT, passed=passed)
    if args.format == "json":
        _emit(args, render_json({"schema": SCHEMA_VERSION, "meta": meta, "checks": rows}))
    else:
        cols = ["quantity", "analytic", "empirical", "stderr", "z"]
        _emit(args, render_csv(meta, cols, [[r[c] for c in cols] for r in rows]))
    return EXIT_OK if passed else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, default_format: str) -> None:
    p.add_argument("--config", help="JSON file of option values; command-line flags take precedence")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=default_format)
    p.add_argument("--deterministic", action="store_true", help="omit the timestamp from output metadata")


def _physics(p: argparse.ArgumentParser, squeezing_db: float | None) -> None:
    p.add_argument("--squeezing-db", type=float, default=squeezing_db)
    p.add_argument(
        "--mu-up",
        type=parse_mu_up,
        default=0.0,
        help="clipping threshold: 0, sqrt_pi/10, 3sqrt_pi/16 or a decimal",
    )


def _protocol_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--mqr", type=int, default=100, help="number of repeater stations")
    _physics(p, 15.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gkp-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keyrate", help="secret key rate versus distance")
    _protocol_args(p)
    p.add_argument("--max-km", type=float, default=None, help="default: twice the protocol I waterfall")
    p.add_argument("--step-km", type=float, default=1.0)
    p.add_argument("--require-positive", action="store_true", help="exit 3 if no point has a positive rate")
    _common(p, "csv")
    p.set_defaults(_run=cmd_keyrate, _parser=p)

    p = sub.add_parser("waterfall", help="distance at which the key rate vanishes")
    _protocol_args(p)
    p.add_argument("--kappa-floor", type=float, default=1e-12)
    p.add_argument("--resolution-km", type=float, default=0.01)
    _common(p, "json")
    p.set_defaults(_run=cmd_waterfall, _parser=p)

    cbsm = sub.add_parser("cbsm", help="concatenated Bell measurement code")
    cbsm_sub = cbsm.add_subparsers(dest="cbsm_command", required=True)
    for name, run in (("eval", cmd_cbsm_eval), ("optimize", cmd_cbsm_optimize)):
        p = cbsm_sub.add_parser(name)
        p.add_argument("--eta0", type=float, default=0.98, help="in-station efficiency")
        p.add_argument("--total-km", type=float, default=1000.0)
        p.add_argument("--detector", choices=[d.value for d in Detector], default=Detector.HOMODYNE_CLIP.value)
        _physics(p, 15.0)
        if name == "eval":
            p.add_argument("--n", type=_positive_int, default=None)
            p.add_argument("--m", type=_positive_int, default=None)
            p.add_argument("--j", type=int, default=0)
            p.add_argument("--l0-km", type=float, default=None)
        else:
            p.add_argument("--j-set", type=_int_set, default=None)
            p.add_argument("--m-range", type=_int_pair, default=None)
            p.add_argument("--n-range", type=_int_pair, default=None)
            p.add_argument("--l0-range-km", type=_float_pair, default=None)
            p.add_argument("--l0-step-km", type=float, default=0.01)
            p.add_argument("--trace", action="store_true", help="include every evaluated point")
        _common(p, "json")
        p.set_defaults(_run=run, _parser=p)

    p = sub.add_parser("mc-validate", help="Monte Carlo check of an analytic probability")
    p.add_argument("--target", choices=("clip", "bsm", "gec", "link"), required=False, default=None)
    p.add_argument("--trials", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variance", type=float, default=None, help="override the variance derived from --squeezing-db")
    p.add_argument("--eta-prod", type=float, default=1.0, help="physical BSM survival probability")
    p.add_argument("--n", type=_positive_int, default=2)
    p.add_argument("--m", type=_positive_int, default=2)
    p.add_argument("--chunk-size", type=_positive_int, default=1 << 16)
    _physics(p, None)
    _common(p, "json")
    p.set_defaults(_run=cmd_mc_validate, _parser=p)
    return parser


def _load_config(path: str, leaf: argparse.ArgumentParser) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        leaf.error(f"argument --config: {exc}")
    if not isinstance(data, dict):
        leaf.error("argument --config: expected a JSON object")
    actions = {a.dest: a for a in leaf._actions}
    out = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            leaf.error(f"argument --config: unknown option {key!r}")
        action = actions[dest]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        # route typed options through their converter, as argparse does for string defaults
        if action.type is not None and value is not None:
            value = str(value)
        if action.choices is not None and value not in action.choices and str(value) in map(str, action.choices):
            value = type(next(iter(action.choices)))(value)
        out[dest] = value
    return out


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        leaf = args._parser
        leaf.set_defaults(**_load_config(args.config, leaf))
        args = parser.parse_args(argv)
    if args.command == "mc-validate":
        for name in ("target", "trials", "seed"):
            if getattr(args, name) is None:
                args._parser.error(f"argument --{name} is required")
        if not (0 <= args.seed < 1 << 64):
            args._parser.error("argument --seed: must be a 64-bit unsigned integer")
        if args.squeezing_db is None:
            args.squeezing_db = MC_DEFAULT_DB[args.target]
    return args


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args._run(args)
    except (UsageError, DomainError, ValueError) as exc:
        print(f"gkp-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
