"""Command-line front end.

Every subcommand prints one canonical JSON document (or a table with
``--format table``). Exit codes: 0 success, 2 usage, 3 invalid input,
4 solver did not converge, 5 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import sys
from typing import Sequence

from . import io
from .balance import balance_delta_bound
from .capacity import (
    DEFAULT_ENUM_CAP,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    brute_force_capacity_oracle,
    individual_channel_capacity,
)
from .core import InfoUnit
from .dp_audit import check_dp
from .errors import ConvergenceError, EnumerationTooLargeError, ValidationError
from .mechanisms import (
    GaussianSpec,
    data_independent_capacity_bound,
    default_distortion,
    discretize_gaussian,
    exponential_calibrate,
    exponential_channel,
    exponential_entropy,
    gaussian_calibrate,
    gaussian_capacity_bound,
    is_data_independent,
    noise_scale_report,
    randomized_response_channel,
    rr_calibrate,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_CONVERGENCE, EXIT_ENUMERATION = 0, 2, 3, 4, 5


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so callers get a code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p, unit=True, fmt=True):
    if unit:
        p.add_argument("--unit", choices=["nats", "bits"], default="nats")
    if fmt:
        p.add_argument("--format", choices=["json", "table"], default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="privchan", description="Information-privacy channel toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    mech = sub.add_parser("mech", help="construct a privacy channel from a query file")
    mech_sub = mech.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    rr = mech_sub.add_parser("rr", help="randomized response")
    rr.add_argument("query")
    rr.add_argument("--p", type=float, required=True, help="flip probability")
    rr.add_argument("--allow-endpoints", action="store_true")
    ex = mech_sub.add_parser("exp", help="discrete exponential channel")
    ex.add_argument("query")
    group = ex.add_mutually_exclusive_group(required=True)
    group.add_argument("--N", type=float, dest="N")
    group.add_argument("--lambda", type=float, dest="lam")
    ga = mech_sub.add_parser("gauss", help="discretized Gaussian channel")
    ga.add_argument("query")
    ga.add_argument("--N", type=float, dest="N", required=True)
    ga.add_argument("--T", type=float, dest="T", required=True)
    ga.add_argument("--grid", type=_float_list, required=True, help="lo,hi,step")
    for p in (rr, ex, ga):
        p.add_argument("--name")
        p.add_argument("--out", help="write the channel here instead of standard output")
        _common(p, unit=False)

    cal = sub.add_parser("calibrate", help="privacy parameter for a target epsilon")
    cal_sub = cal.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    c_rr = cal_sub.add_parser("rr")
    c_ex = cal_sub.add_parser("exp")
    c_ex.add_argument("--k", type=int, required=True)
    c_ga = cal_sub.add_parser("gauss")
    c_ga.add_argument("--T", type=float, dest="T", required=True)
    for p in (c_rr, c_ex, c_ga):
        p.add_argument("--epsilon", type=float, required=True)
        _common(p)

    cap = sub.add_parser("capacity", help="individual channel capacity")
    cap.add_argument("channel")
    cap.add_argument("--oracle", action="store_true", help="also run the sampling oracle")
    cap.add_argument("--samples", type=_positive_int, default=1000)
    cap.add_argument("--seed", type=_seed, default=0)
    cap.add_argument("--tol", type=float, default=DEFAULT_TOL)
    cap.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    cap.add_argument("--enum-cap", type=_positive_int, default=DEFAULT_ENUM_CAP)
    _common(cap)

    audit = sub.add_parser("audit", help="privacy audits")
    audit_sub = audit.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    a_dp = audit_sub.add_parser("dp", help="epsilon-differential privacy")
    a_ip = audit_sub.add_parser("ip", help="epsilon-information privacy")
    a_ip.add_argument("--tol", type=float, default=DEFAULT_TOL)
    a_ip.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    a_ip.add_argument("--enum-cap", type=_positive_int, default=DEFAULT_ENUM_CAP)
    for p in (a_dp, a_ip):
        p.add_argument("channel")
        p.add_argument("--epsilon", type=float, required=True)
        _common(p)

    bal = sub.add_parser("balance", help="balance-function estimates on a grid of b")
    bal.add_argument("channel")
    bal.add_argument("--b-grid", type=_float_list, required=True)
    bal.add_argument("--restarts", type=_positive_int, default=8)
    bal.add_argument("--seed", type=_seed, default=0)
    bal.add_argument("--tol", type=float, default=DEFAULT_TOL)
    bal.add_argument("--enum-cap", type=_positive_int, default=DEFAULT_ENUM_CAP)
    _common(bal)

    cmp_ = sub.add_parser("compare-noise", help="noise scales of DP mechanisms vs the Gaussian channel")
    cmp_.add_argument("--epsilon-dp", type=float, required=True)
    cmp_.add_argument("--delta-prime", type=float, required=True)
    cmp_.add_argument("--delta-f", type=float, required=True)
    cmp_.add_argument("--T", type=float, dest="T", required=True)
    cmp_.add_argument("--epsilon-ip", type=float, required=True)
    cmp_.add_argument("--delta-balance", type=float, default=0.0)
    _common(cmp_, unit=False)
    return parser


# -- subcommands -----------------------------------------------------------


def _mech(args) -> dict:
    qf = io.read_query_file(args.query)
    if args.kind == "rr":
        channel = randomized_response_channel(qf.query, args.p, args.allow_endpoints)
    elif args.kind == "exp":
        N = args.N if args.N is not None else _inverse(args.lam)
        d = qf.distortion if qf.distortion is not None else default_distortion(qf.query.output_size)
        channel = exponential_channel(qf.query, d, N)
    else:
        if qf.values is None:
            raise ValidationError("/values: query file needs real-valued outputs for a Gaussian channel")
        if len(args.grid) != 3:
            raise ValidationError("--grid expects lo,hi,step")
        lo, hi, step = args.grid
        spec = GaussianSpec(qf.values, args.T, args.N)
        channel = discretize_gaussian(spec, qf.query.universe, lo, hi, step)
    doc = io.ChannelFile(channel, args.name, InfoUnit.NATS).to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(io.dumps(doc))
        return {"path": args.out, "universes": doc["universes"], "output_size": doc["output_size"]}
    return doc


def _inverse(lam):
    if lam is None or not lam > 0:
        raise ValidationError("--lambda must be positive")
    return 1.0 / lam


def _calibrate(args) -> dict:
    unit = InfoUnit.parse(args.unit)
    eps = unit.to_nats(args.epsilon)
    if args.kind == "rr":
        cal = rr_calibrate(eps)
        return {
            "mechanism": "rr",
            "epsilon": args.epsilon,
            "unit": unit.value,
            "p_star": cal.p_star,
            "interval": list(cal.interval),
        }
    if args.kind == "exp":
        lam = exponential_calibrate(eps, args.k)
        doc = {
            "mechanism": "exp",
            "epsilon": args.epsilon,
            "unit": unit.value,
            "k": args.k,
            "lambda_star": lam,
            "N_star": 0.0 if math.isinf(lam) else 1.0 / lam,
            "all_admissible": math.isinf(lam),
        }
        if not math.isinf(lam):
            bound = math.log(args.k) - exponential_entropy(args.k, lam)
            doc["bound_at_lambda_star"] = unit.from_nats(bound)
        return doc
    N = gaussian_calibrate(eps, args.T)
    return {
        "mechanism": "gauss",
        "epsilon": args.epsilon,
        "unit": unit.value,
        "T": args.T,
        "N": N,
        "sqrt_N": math.sqrt(N),
        "bound_at_N": unit.from_nats(gaussian_capacity_bound(args.T, N)),
    }


def _capacity_doc(channel, args, unit):
    report = individual_channel_capacity(
        channel, tol=args.tol, max_iter=args.max_iter, enum_cap=args.enum_cap
    )
    doc = {
        "value": unit.from_nats(report.value),
        "unit": unit.value,
        "argmax_individual": report.individual,
        "argmax_selection": list(report.selection.choices),
        "optimizer": report.optimizer.tolist(),
        "gap": unit.from_nats(report.gap),
        "per_individual": [unit.from_nats(v) for v in report.per_individual],
        "selections_evaluated": list(report.evaluated),
        "selections_distinct": list(report.distinct),
    }
    if is_data_independent(channel):
        doc["data_independent_bound"] = data_independent_capacity_bound(channel, unit)
    return report, doc


def _capacity(args) -> dict:
    unit = InfoUnit.parse(args.unit)
    channel = io.load_channel(args.channel)
    _, doc = _capacity_doc(channel, args, unit)
    if args.oracle:
        values = [
            unit.from_nats(
                brute_force_capacity_oracle(
                    channel, i, args.samples, args.seed, tol=args.tol, max_iter=args.max_iter
                )
            )
            for i in range(channel.universe.n)
        ]
        doc["oracle"] = {"samples": args.samples, "seed": args.seed, "per_individual": values}
    return doc


def _audit(args) -> dict:
    unit = InfoUnit.parse(args.unit)
    channel = io.load_channel(args.channel)
    if args.kind == "dp":
        report = check_dp(channel, unit.to_nats(args.epsilon))
        w = report.witness
        return {
            "audit": "dp",
            "epsilon": args.epsilon,
            "unit": unit.value,
            "epsilon_star": unit.from_nats(report.epsilon_star),
            "pass": report.passed,
            "witness": None
            if w is None
            else {
                "individual": w.individual,
                "y": w.y,
                "x": list(w.x),
                "x_prime": list(w.x_prime),
                "p": w.p,
                "p_prime": w.p_prime,
            },
        }
    report, doc = _capacity_doc(channel, args, unit)
    doc.update(
        {
            "audit": "ip",
            "epsilon": args.epsilon,
            "pass": bool(report.value <= unit.to_nats(args.epsilon)),
        }
    )
    return doc


def _balance(args) -> dict:
    unit = InfoUnit.parse(args.unit)
    channel = io.load_channel(args.channel)
    grid = [unit.to_nats(b) for b in args.b_grid]
    report = balance_delta_bound(
        channel, grid, restarts=args.restarts, seed=args.seed, tol=args.tol, enum_cap=args.enum_cap
    )
    return {
        "unit": unit.value,
        "capacity": unit.from_nats(report.capacity),
        "crosscheck_ok": report.crosscheck_ok,
        "seed": args.seed,
        "points": [
            {
                "b": unit.from_nats(pt.b),
                "restricted_lower_bound": unit.from_nats(pt.restricted),
                "delta_upper_estimate": unit.from_nats(pt.delta),
                "delta_envelope": unit.from_nats(pt.envelope),
            }
            for pt in report.points
        ],
    }


def _compare(args) -> dict:
    r = noise_scale_report(
        args.epsilon_dp, args.delta_prime, args.delta_f, args.T, args.epsilon_ip, args.delta_balance
    )
    return {
        "inputs": {
            "epsilon_dp": r.epsilon_dp,
            "delta_prime": r.delta_prime,
            "delta_f": r.delta_f,
            "T": r.T,
            "epsilon_ip_nats": r.epsilon_ip,
            "delta_balance_nats": r.delta_balance,
        },
        "scales": {
            "laplace_mechanism": {"regime": "epsilon-DP", "scale": r.laplace_dp},
            "gaussian_mechanism": {"regime": "(epsilon, delta')-DP", "scale": r.gaussian_dp},
            "gaussian_privacy_channel": {
                "regime": "epsilon-information privacy",
                "scale": r.gaussian_channel,
            },
        },
    }


_HANDLERS = {
    "mech": _mech,
    "calibrate": _calibrate,
    "capacity": _capacity,
    "audit": _audit,
    "balance": _balance,
    "compare-noise": _compare,
}


def _table(doc, prefix="") -> list[tuple[str, str]]:
    rows = []
    for key in sorted(doc):
        value = doc[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_table(value, f"{name}."))
        else:
            rows.append((name, io.dumps(value).strip()))
    return rows


def render(doc: dict, fmt: str, stream) -> None:
    if fmt == "json":
        stream.write(io.dumps(doc))
        return
    rows = _table(doc)
    width = max((len(k) for k, _ in rows), default=0)
    color = stream.isatty() and "NO_COLOR" not in os.environ
    for key, value in rows:
        label = key.ljust(width)
        if color:
            label = f"\033[1m{label}\033[0m"
        stream.write(f"{label}  {value}\n")


def run_command(argv: Sequence[str], stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(list(argv))
    except _UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        doc = _HANDLERS[args.command](args)
    except EnumerationTooLargeError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_ENUMERATION
    except ConvergenceError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONVERGENCE
    except (ValidationError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    render(doc, getattr(args, "format", "json"), stdout)
    return EXIT_OK


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
