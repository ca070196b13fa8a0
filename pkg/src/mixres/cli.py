"""``mixres`` command line: bounds, train, verify, study.

Exit codes: 0 success, 1 verification failure, 2 invalid input or config,
3 coefficient assumption failure, 4 training divergence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import replace

from . import theory
from .harness import ConfigError, load_config, load_study, run_study, write_run
from .network import NonFiniteError
from .problem import AssumptionError
from .registry import get_problem
from .trainer import DivergenceError
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_DIVERGED = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _csv_numbers(typ):
    def parse(s):
        try:
            return [typ(v) for v in s.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None

    return parse


def build_parser() -> argparse.ArgumentParser:
    def flags(top: bool):
        # subcommand copies must not overwrite values given before the subcommand
        g = argparse.ArgumentParser(add_help=False)
        kw = {} if top else {"default": argparse.SUPPRESS}
        g.add_argument("--seed", type=int, help="base seed (u64); overrides train.seed in configs", **({"default": None} if top else kw))
        g.add_argument("--json", action="store_true", help="machine-readable output", **kw)
        g.add_argument("--quiet", action="store_true", help="suppress progress output", **kw)
        return g

    common = flags(False)
    p = _Parser(prog="mixres", description=__doc__.splitlines()[0], parents=[flags(True)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", parents=[common], help="evaluate prescriptions and bounds")
    b.add_argument("--eps", type=float, help="accuracy target epsilon")
    b.add_argument("--dim", type=int, help="dimension d")
    b.add_argument("--mu", type=float, help="smoothness margin in (0,1)")
    for name in ("c-depth", "c-width", "c-weight", "c-samples"):
        b.add_argument(f"--{name}", type=float, default=1.0)
    b.add_argument("--widths", type=_csv_numbers(int), help="hidden widths n_1..n_{D-1} for the prescribed depth")
    b.add_argument("--arch", type=_csv_numbers(int), help="explicit widths n_0..n_D instead of a prescription")
    b.add_argument("--weight-bound", type=float, help="B_theta for --arch")
    b.add_argument("--nnz", type=int, help="nonzero parameter count for --arch (default: dense)")
    b.add_argument("--N", type=int, dest="n_samples", help="sample count (default: prescribed)")
    b.add_argument("--problem", help="registered problem supplying omega and boundary constants")
    b.add_argument("--B-g", type=float, default=0.0, dest="B_g")
    b.add_argument("--B-gprime", type=float, default=0.0, dest="B_gprime")
    b.add_argument("--B-phiprime", type=float, default=2.0, dest="B_phiprime")
    b.add_argument("--c-omega", type=float, default=1.0)
    b.add_argument("--grad-omega", type=float, default=0.0, help="sup norm of grad omega")
    b.add_argument("--c-coe", type=float, default=1.0)
    b.add_argument("--bf", choices=theory.BF_VARIANTS, default="weight")
    b.add_argument("--bfprime", choices=theory.BFPRIME_VARIANTS, default="assumption")

    t = sub.add_parser("train", parents=[common], help="train from a config file")
    t.add_argument("config")
    t.add_argument("--out", default="run", help="output directory")
    t.add_argument("--no-timing", action="store_true", help="omit wall time for byte-stable reports")

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("--suite", required=True, help=f"one of {', '.join(SUITES)} or 'all'")

    s = sub.add_parser("study", parents=[common], help="sweep sample counts, write CSV")
    s.add_argument("spec")
    s.add_argument("--out", help="CSV path (default: spec's study.output)")
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--no-timing", action="store_true", help="write wall_time 0 for byte-identical reruns")
    return p


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def cmd_bounds(args) -> int:
    kw = dict(B_g=args.B_g, B_gprime=args.B_gprime, B_phiprime=args.B_phiprime, c_omega=args.c_omega,
              grad_omega_sup=args.grad_omega, c_coe=args.c_coe, bf_variant=args.bf, bfprime_variant=args.bfprime)
    try:
        if args.problem:
            prob, _ = get_problem(args.problem)
            kw.update(zip(("B_g", "B_gprime", "B_phiprime"), prob.boundary.constants))
            kw.update(c_omega=prob.c_omega, grad_omega_sup=prob.grad_omega_sup)
        if args.arch:
            if args.weight_bound is None or args.n_samples is None:
                raise ValueError("--arch needs --weight-bound and --N")
            w = args.arch
            if len(w) < 2 or w[-1] != w[0] + 1:
                raise ValueError("--arch widths must run from d to d+1")
            dense = sum((a + 1) * b for a, b in zip(w[:-1], w[1:]))
            arch = theory.Architecture(w[0], len(w) - 1, int(math.prod(w[1:-1])),
                                       args.nnz or dense, args.weight_bound, w[-2])
            report = theory.build_report(arch, args.n_samples, **kw)
        else:
            if args.eps is None or args.dim is None or args.mu is None:
                raise ValueError("need --eps, --dim and --mu (or --arch)")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                inp = theory.PrescriptionInput(args.eps, args.dim, args.mu, args.c_depth, args.c_width,
                                               args.c_weight, args.c_samples)
            for w_ in caught:
                _say(args, f"warning: {w_.message}")
            report = theory.prescription_report(inp, widths=args.widths, N=args.n_samples, **kw)
    except AssumptionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ValueError, KeyError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    else:
        print(report.to_text())
    return EXIT_OK


def _guarded(fn, args):
    try:
        return fn()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (DivergenceError, NonFiniteError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def cmd_train(args) -> int:
    def go():
        run = load_config(args.config)
        if args.seed is not None:
            run = run.with_seed(args.seed)
        _say(args, f"training {run.problem} widths={list(run.widths)} N={run.train.batch} steps={run.train.steps}")
        res = write_run(run, args.out, include_timing=not args.no_timing)
        summary = res.summary(include_timing=not args.no_timing)
        if args.json:
            print(json.dumps(summary, indent=1, sort_keys=True))
        else:
            for k, v in summary.items():
                print(f"{k:<16} {v:.10g}")
        return EXIT_OK

    return _guarded(go, args)


def cmd_verify(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    if any(n not in SUITES for n in names):
        print(f"error: unknown suite {args.suite!r}; expected one of {', '.join(SUITES)} or 'all'", file=sys.stderr)
        return EXIT_CONFIG
    checks = []
    for n in names:
        _say(args, f"running suite {n}")
        checks.extend(run_suite(n, seed=args.seed or 0))
    ok = all(c.passed for c in checks)
    if args.json:
        print(json.dumps({"passed": ok, "checks": [c.to_dict() for c in checks]}, indent=1))
    else:
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.suite:<10} {c.name:<52} {c.value:.6g}  (limit {c.threshold:g}) {c.detail}")
        print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_study(args) -> int:
    def go():
        spec = load_study(args.spec)
        if args.seed is not None:
            spec = replace(spec, run=spec.run.with_seed(args.seed))
        out = args.out or spec.output
        if not out:
            raise ConfigError("no output path: pass --out or set study.output")
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")

        def progress(row):
            _say(args, f"N={row['N']} trial={row['trial']} h1_error={row['h1_error']:.6g}")

        run_study(spec, out=out, parallel=args.parallel, include_timing=not args.no_timing, on_row=progress)
        if args.json:
            print(json.dumps({"output": str(out)}))
        return EXIT_OK

    return _guarded(go, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"bounds": cmd_bounds, "train": cmd_train, "verify": cmd_verify, "study": cmd_study}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
