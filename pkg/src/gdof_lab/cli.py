"""Command-line front end: instance ingestion, sweeps, deterministic output.

Exit codes: 0 success, 2 validation/usage error, 3 assertion failure (a
measured quantity violated its analytic bound).  All randomness flows from the
--seed flag; outputs are byte-identical for identical (config, seed) and
independent of the GDOF_LAB_THREADS worker cap.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import ais, budget, core, scheme

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ASSERTION = 3


class BoundViolation(core.GdofLabError):
    """An empirical quantity exceeded its analytic bound."""


def _fmt(x):
    """12-significant-digit decimal rendering, locale independent."""
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(_fmt(float(obj)))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _dump_json(payload):
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def _write_out(text, out_path):
    if out_path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out_path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gdof-lab-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _workers():
    raw = os.environ.get("GDOF_LAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return max(1, n) if n > 0 else 1


def _map_ordered(fn, items):
    items = list(items)
    n = _workers()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _float_list(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise core.ValidationError(f"bad numeric list {text!r}") from exc
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise core.ValidationError("grid must be nonempty and ascending")
    return values


def _load_2user(path):
    spec = core.load_instance(path)
    if not isinstance(spec, core.ChannelSpec2):
        raise core.ValidationError("this command needs a 2-user instance file")
    return spec


def _require_seed(args):
    if args.seed is None:
        raise core.ValidationError("--seed is required for stochastic commands")
    return args.seed


# ---------------------------------------------------------------- commands


def _cmd_gdof2(args):
    spec = _load_2user(args.instance)
    bd = core.sum_gdof_two_user(spec)
    line = f"D1={_fmt(bd.D1)} D2={_fmt(bd.D2)} d_sum={_fmt(bd.d_sum)}\n"
    sys.stdout.write(line)
    if args.out:
        payload = {
            "alpha": spec.alpha,
            "beta": spec.beta,
            "beta1": bd.beta1,
            "beta2": bd.beta2,
            "D1": bd.D1,
            "D2": bd.D2,
            "d_sum": bd.d_sum,
            "binding": bd.binding,
            "regime": bd.regime,
        }
        _write_out(_dump_json(payload), args.out)
    return EXIT_OK


def _cmd_gdofk(args):
    if args.instance:
        spec = core.load_instance(args.instance)
        if not isinstance(spec, core.SymmetricSpecK):
            raise core.ValidationError("instance file is not a symmetric K-user spec")
    else:
        if args.K is None or args.alpha is None or args.beta is None:
            raise core.ValidationError("provide --instance or all of --K/--alpha/--beta")
        spec = core.SymmetricSpecK(K=args.K, alpha=args.alpha, beta=args.beta)
    value = core.sum_gdof_k_symmetric(spec)
    sys.stdout.write(_fmt(value) + "\n")
    if args.out:
        payload = {"K": spec.K, "alpha": spec.alpha, "beta": spec.beta, "d_sum": value}
        _write_out(_dump_json(payload), args.out)
    return EXIT_OK


def _budget_csv(alpha, budgets, step):
    curve = budget.budget_curve(alpha, budgets, step=step)
    buf = io.StringIO()
    buf.write("budget,d_sum,b11,b12,b21,b22\n")
    for b, d, alloc in curve.points:
        (b11, b12), (b21, b22) = alloc.beta
        row = [b, d, b11, b12, b21, b22]
        buf.write(",".join(_fmt(float(v)) for v in row) + "\n")
    return buf.getvalue(), curve


def _cmd_budget(args):
    spec = _load_2user(args.instance)
    budgets = _float_list(args.budgets)
    text, _ = _budget_csv(spec.alpha, budgets, args.step)
    _write_out(text, args.out)
    return EXIT_OK


def _layer_summary(layer):
    exps = [None if e == -np.inf else float(e) for e in layer.antenna_exponents]
    return {
        "message_id": layer.message_id,
        "user": layer.user,
        "gdof_load": layer.gdof_load,
        "power_exponent": layer.power_exponent,
        "precoder_rule": layer.precoder_rule,
        "decoded_by": list(layer.decoded_by),
        "decode_rank": [list(p) for p in layer.decode_rank],
        "antenna_exponents": exps,
    }


def _achieve_payload(spec, args):
    layout, sim_spec = scheme.plan(spec)
    p_grid = _float_list(args.p_grid)
    density = core.BoundedDensitySpec()
    result = scheme.estimate_gdof_slope(
        layout, sim_spec, density, p_grid, args.trials, args.seed
    )
    transform = layout.transform
    slopes = transform.invert_users(result.slope_estimates)
    targets = transform.invert_users(layout.target)
    rates = [list(transform.invert_users(r)) for r in result.per_user_rates]
    payload = {
        "instance": {"alpha": getattr(spec, "alpha"), "beta": getattr(spec, "beta")}
        if isinstance(spec, core.ChannelSpec2)
        else {"K": spec.K, "alpha": spec.alpha, "beta": spec.beta},
        "layout": {
            "case_id": layout.case_id,
            "transform": {
                "user_swap": transform.user_swap,
                "antenna_swap": transform.antenna_swap,
            },
            "reduction": layout.reduction,
            "m": layout.m,
            "target": list(targets),
            "layers": [_layer_summary(l) for l in layout.layers],
        },
        "p_grid": list(p_grid),
        "per_user_rates": rates,
        "per_user_slopes": list(slopes),
        "per_layer_sinr_exponents": {
            f"{msg}@rx{rx}": v
            for (msg, rx), v in sorted(result.per_layer_sinr_exponents.items())
        },
        "per_layer_signal_exponents": {
            f"{msg}@rx{rx}": v
            for (msg, rx), v in sorted(result.per_layer_signal_exponents.items())
        },
    }
    return payload, p_grid, rates


def _cmd_achieve(args):
    _require_seed(args)
    spec = core.load_instance(args.instance)
    payload, p_grid, rates = _achieve_payload(spec, args)
    if args.format == "csv":
        n_users = len(rates[0])
        header = "P," + ",".join(f"rate_user{u + 1}" for u in range(n_users))
        lines = [header]
        for p, row in zip(p_grid, rates):
            lines.append(",".join(_fmt(float(v)) for v in [p, *row]))
        _write_out("\n".join(lines) + "\n", args.out)
    else:
        _write_out(_dump_json(payload), args.out)
    return EXIT_OK


def _cmd_ais_prob(args):
    _require_seed(args)
    spec = _load_2user(args.instance)
    inst = ais.DeterministicInstance(
        p_bar=args.p_bar, alpha=spec.alpha, beta=spec.beta
    )
    density = core.BoundedDensitySpec()
    rng = core.make_rng(args.seed, 10**6)
    probes = []

    def one(i):
        while True:
            lam = (rng.integers(0, inst.x1_max + 1), rng.integers(0, inst.x2_max + 1))
            nu = (rng.integers(0, inst.x1_max + 1), rng.integers(0, inst.x2_max + 1))
            if tuple(lam) != tuple(nu):
                break
        pair = ais.CodewordPair(lambda_pair=lam, nu_pair=nu)
        return ais.alignment_probability_mc(
            pair, inst, density, args.trials, (args.seed, i)
        )

    # pair sampling shares one stream, so this loop stays sequential
    probes = [one(i) for i in range(args.pairs)]
    violations = sum(1 for p in probes if not p.ok)
    payload = {
        "p_bar": inst.p_bar,
        "pairs": args.pairs,
        "trials": args.trials,
        "violations": violations,
        "max_estimate": max(p.estimate for p in probes),
        "max_excess": max(p.estimate - p.bound for p in probes),
        "pass": violations == 0,
    }
    _write_out(_dump_json(payload), args.out)
    if violations:
        raise BoundViolation(f"{violations} alignment probes exceeded the bound")
    return EXIT_OK


def _cmd_ais_size(args):
    _require_seed(args)
    spec = _load_2user(args.instance)
    grid = _float_list(args.p_bar_grid)
    stats = ais.expected_size_curve(
        spec.alpha,
        spec.beta,
        grid,
        args.draws,
        args.seed,
        cap=args.cap,
        slack=args.slack,
    )
    if args.format == "csv":
        lines = ["p_bar,mean_size,draws"]
        for pb, m in zip(stats.p_bar_grid, stats.mean_size):
            lines.append(",".join([_fmt(float(pb)), _fmt(float(m)), str(args.draws)]))
        _write_out("\n".join(lines) + "\n", args.out)
    else:
        payload = {
            "p_bar_grid": list(stats.p_bar_grid),
            "mean_size": list(stats.mean_size),
            "fitted_exponent": stats.fitted_exponent,
            "bound_exponent": stats.bound_exponent,
            "slack": stats.slack,
            "pass": stats.ok,
        }
        _write_out(_dump_json(payload), args.out)
    if not stats.ok:
        raise BoundViolation(
            f"fitted exponent {stats.fitted_exponent} exceeds "
            f"{stats.bound_exponent} + {stats.slack}"
        )
    return EXIT_OK


def _cmd_sweep(args):
    spec = core.load_instance(args.instance)
    if args.axis == "budget":
        if not isinstance(spec, core.ChannelSpec2):
            raise core.ValidationError("budget sweep needs a 2-user instance")
        budgets = _float_list(args.grid)
        text, _ = _budget_csv(spec.alpha, budgets, args.step)
        _write_out(text, args.out)
        return EXIT_OK
    if args.axis == "beta":
        if not isinstance(spec, core.ChannelSpec2):
            raise core.ValidationError("beta sweep needs a 2-user instance")
        grid = _float_list(args.grid)

        def row(b):
            swept = core.ChannelSpec2(
                alpha=spec.alpha, beta=[[b, b], [b, b]]
            )
            return b, core.sum_gdof_two_user(swept).d_sum

        rows = _map_ordered(row, grid)
        lines = ["beta,d_sum"] + [
            ",".join(_fmt(float(v)) for v in r) for r in rows
        ]
        _write_out("\n".join(lines) + "\n", args.out)
        return EXIT_OK
    if args.axis == "alpha":
        if not isinstance(spec, core.SymmetricSpecK):
            raise core.ValidationError("alpha sweep needs a symmetric K-user instance")
        grid = _float_list(args.grid)

        def row(a):
            swept = core.SymmetricSpecK(K=spec.K, alpha=a, beta=min(spec.beta, a))
            return a, core.sum_gdof_k_symmetric(swept)

        rows = _map_ordered(row, grid)
        lines = ["alpha,d_sum"] + [
            ",".join(_fmt(float(v)) for v in r) for r in rows
        ]
        _write_out("\n".join(lines) + "\n", args.out)
        return EXIT_OK
    if args.axis == "P":
        _require_seed(args)
        args.p_grid = args.grid
        args.format = "csv"
        return _cmd_achieve(args)
    raise core.ValidationError(f"unknown sweep axis {args.axis!r}")


# ---------------------------------------------------------------- parser


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="gdof-lab",
        description="Sum-GDoF formulas, CSIT budget optimization, achievability "
        "simulation, and aligned-image-set checks for the MISO BC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True):
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="64-bit RNG seed")

    p = sub.add_parser("gdof2", help="evaluate the 2-user sum-GDoF formula")
    p.add_argument("--instance", required=True)
    add_common(p, seed=False)
    p.set_defaults(func=_cmd_gdof2)

    p = sub.add_parser("gdofk", help="evaluate the symmetric K-user formula")
    p.add_argument("--instance", default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    add_common(p, seed=False)
    p.set_defaults(func=_cmd_gdofk)

    p = sub.add_parser("budget", help="optimal CSIT budget allocation curve (CSV)")
    p.add_argument("--instance", required=True)
    p.add_argument("--budgets", required=True, help="comma list, ascending")
    p.add_argument("--step", type=float, default=budget.DEFAULT_STEP)
    add_common(p, seed=False)
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("achieve", help="simulate the layered scheme over a P grid")
    p.add_argument("--instance", required=True)
    p.add_argument("--p-grid", required=True, help="comma list of SNRs, ascending")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    add_common(p)
    p.set_defaults(func=_cmd_achieve)

    p = sub.add_parser("ais-prob", help="alignment probability vs analytic bound")
    p.add_argument("--instance", required=True)
    p.add_argument("--p-bar", type=float, required=True)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--trials", type=int, default=1000)
    add_common(p)
    p.set_defaults(func=_cmd_ais_prob)

    p = sub.add_parser("ais-size", help="aligned-image-set growth exponent")
    p.add_argument("--instance", required=True)
    p.add_argument("--p-bar-grid", default="8,16,32,64")
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--cap", type=int, default=ais.DEFAULT_ENUM_CAP)
    p.add_argument("--slack", type=float, default=0.15)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    add_common(p)
    p.set_defaults(func=_cmd_ais_size)

    p = sub.add_parser("sweep", help="long-form CSV over a declared axis")
    p.add_argument("--axis", required=True, choices=["budget", "beta", "alpha", "P"])
    p.add_argument("--instance", required=True)
    p.add_argument("--grid", required=True, help="comma list, ascending")
    p.add_argument("--step", type=float, default=budget.DEFAULT_STEP)
    p.add_argument("--trials", type=int, default=200)
    add_common(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BoundViolation as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    except (core.ValidationError, core.CapExceededError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
