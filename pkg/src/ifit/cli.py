"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 non-convergence, 3 model or protocol error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .core import Bounds, Config, ConfigError, FitResult, IfitError, NonConvergenceError
from .external import SubprocessSimulator
from .harness import (
    benchmark,
    fit,
    mc_error_study,
    read_result,
    worker_count,
    write_result,
    write_scores_csv,
    write_trace_csv,
)
from .models import MODEL_NAMES, ToadModel, load_toad_csv, make_dataset, toad_summary
from .sampling import DATASET, RngStream

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE, EXIT_MODEL = 0, 1, 2, 3
PAPER_SCALE_REPS = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = _Parser(prog="ifit", description="Simulation-based estimation with a two-phase search.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit one dataset")
    f.add_argument("--model", required=True, help=f"one of {', '.join(MODEL_NAMES)} or exec:COMMAND")
    f.add_argument("--obs", help='observed summary, JSON {"t": [...]}')
    f.add_argument("--toad-csv", help="observed toad positions (toad_id,day,position)")
    f.add_argument("--config", required=True, help="config JSON")
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--out", required=True, help="result JSON (or trace CSV if it ends in .csv)")
    f.add_argument("--trace-csv", help="also write the iteration trace here")
    f.add_argument("--scores-csv", help="also write the standardized scores here")
    f.add_argument("--lower", type=_floats, help="exec models: lower bounds, comma-separated")
    f.add_argument("--upper", type=_floats, help="exec models: upper bounds, comma-separated")
    f.add_argument("--timeout", type=float, default=60.0, help="exec models: seconds per call")

    b = sub.add_parser("bench", help="Monte Carlo benchmark on synthetic datasets")
    b.add_argument("--model", required=True, choices=MODEL_NAMES)
    b.add_argument("--reps", type=int, help="number of datasets B (default 100)")
    b.add_argument("--paper-scale", action="store_true", help=f"B={PAPER_SCALE_REPS} unless --reps is given")
    b.add_argument("--config", help="config JSON (defaults otherwise)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--threads", type=int, help="worker processes (default IFIT_THREADS)")
    b.add_argument("--out", help="report JSON")

    m = sub.add_parser("mcerr", help="Monte Carlo error study")
    m.add_argument("--model", required=True, choices=MODEL_NAMES)
    m.add_argument("--datasets", type=int, default=20)
    m.add_argument("--repeats", type=int, default=5)
    m.add_argument("--config", help="config JSON (defaults otherwise)")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--threads", type=int)
    m.add_argument("--out", help="report JSON")

    d = sub.add_parser("diagnose", help="print goodness-of-fit output of a result file")
    d.add_argument("--result", required=True)
    d.add_argument("--scores-csv", help="also write the standardized scores here")
    return p


def _read_config(path, seed=None):
    if path is None:
        cfg = Config()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = Config.from_dict(json.load(fh))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
    return cfg.replace(seed=seed) if seed is not None else cfg


def _read_obs(path):
    try:
        with open(path, encoding="utf-8") as fh:
            t = json.load(fh)["t"]
        return np.asarray(t, dtype=float).reshape(-1)
    except OSError as exc:
        raise UsageError(f"cannot read observations: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f'observations must be JSON {{"t": [...]}}: {exc}') from None


def _setup_fit(args, cfg):
    """Simulator, observed summary and fit stream for the ``fit`` subcommand."""
    stream = RngStream(cfg.seed)
    if args.model.startswith("exec:"):
        if args.obs is None or args.lower is None or args.upper is None:
            raise UsageError("exec models need --obs, --lower and --upper")
        t_obs = _read_obs(args.obs)
        try:
            bounds = Bounds(args.lower, args.upper)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        sim = SubprocessSimulator(args.model[len("exec:"):], bounds, t_obs.size,
                                  timeout=args.timeout, workers=worker_count())
        return sim, t_obs, stream
    if args.model not in MODEL_NAMES:
        raise UsageError(f"unknown model {args.model!r}")
    if args.toad_csv is not None:
        if args.model != "toad":
            raise UsageError("--toad-csv applies to the toad model only")
        try:
            positions, mask = load_toad_csv(args.toad_csv)
        except OSError as exc:
            raise UsageError(f"cannot read toad data: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"bad toad data: {exc}") from None
        model = ToadModel(mask=mask)
        return model, toad_summary(positions), stream
    # same dataset and fit streams as replication 0 of a benchmark with this seed
    model, t_obs = make_dataset(args.model, stream.generator(DATASET, 0))
    if args.obs is not None:
        t_obs = _read_obs(args.obs)
    return model, t_obs, stream.child(0, 0)


def _print_fit(res: FitResult, out=None):
    out = out or sys.stdout
    print(f"converged: {res.converged}   simulations: {res.n_simulations}", file=out)
    print(f"{'param':>5} {'estimate':>14} {'std.err':>12}", file=out)
    for i, (e, s) in enumerate(zip(res.estimate, res.std_errors)):
        print(f"{i:>5} {e:>14.6g} {s:>12.4g}", file=out)


def _print_diagnostics(res: FitResult, out=None):
    out = out or sys.stdout
    if res.sh_pvalue is None:
        print(f"Sargan-Hansen: stat={res.sh_stat:.4g} df={res.sh_df} p-value=n/a (exactly identified)", file=out)
    else:
        print(f"Sargan-Hansen: stat={res.sh_stat:.4g} df={res.sh_df} p-value={res.sh_pvalue:.4g}", file=out)
    print(f"{'stat':>5} {'score':>10}", file=out)
    for i, s in enumerate(np.asarray(res.std_scores)):
        flag = "  *" if abs(s) > 2 else ""
        print(f"{i:>5} {s:>10.3f}{flag}", file=out)


def _cmd_fit(args):
    cfg = _read_config(args.config, args.seed)
    sim, t_obs, stream = _setup_fit(args, cfg)
    try:
        try:
            res = fit(sim, t_obs, cfg, stream=stream)
        except NonConvergenceError as exc:
            if isinstance(exc.partial, FitResult):
                write_result(exc.partial, args.out)
            print(f"not converged ({exc.phase} phase): {exc}", file=sys.stderr)
            return EXIT_NONCONVERGENCE
        except ValueError as exc:
            if isinstance(exc, IfitError):
                raise
            raise UsageError(str(exc)) from None
    finally:
        if isinstance(sim, SubprocessSimulator):
            sim.close()
    write_result(res, args.out)
    if args.trace_csv:
        write_trace_csv(res, args.trace_csv)
    if args.scores_csv:
        write_scores_csv(res, args.scores_csv)
    _print_fit(res)
    _print_diagnostics(res)
    return EXIT_OK


def _cmd_bench(args):
    cfg = _read_config(args.config)
    reps = args.reps if args.reps is not None else (PAPER_SCALE_REPS if args.paper_scale else 100)
    if reps < 1:
        raise UsageError("--reps must be positive")
    rep = benchmark(args.model, reps, cfg, master_seed=args.seed, threads=args.threads)
    if args.out:
        write_result(rep, args.out)
    print(f"model={rep.model} B={rep.B} AMS={rep.ams:.1f} AARE={rep.aare:.4f} failures={rep.failures}")
    print(f"{'param':>5} {'se':>10} {'ave_se':>10} {'sd_se':>10}")
    for i, row in enumerate(zip(rep.se, rep.ave_se, rep.sd_se)):
        print(f"{i:>5} " + " ".join(f"{v:>10.4g}" for v in row))
    if rep.flagged:
        print(f"warning: {rep.failures} of {rep.B} replications failed", file=sys.stderr)
    return EXIT_OK


def _cmd_mcerr(args):
    cfg = _read_config(args.config)
    if args.datasets < 2 or args.repeats < 2:
        raise UsageError("need --datasets >= 2 and --repeats >= 2")
    rep = mc_error_study(args.model, args.datasets, args.repeats, cfg, seed=args.seed, threads=args.threads)
    if args.out:
        write_result(rep, args.out)
    print(f"model={rep.model} G={rep.G} R={rep.R} failures={rep.failures}")
    print("within/total SS: " + " ".join(f"{r:.4g}" for r in rep.ratio))
    return EXIT_OK


def _cmd_diagnose(args):
    try:
        res = read_result(args.result)
    except OSError as exc:
        raise UsageError(f"cannot read result: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"not a result file: {exc}") from None
    _print_diagnostics(res)
    if args.scores_csv:
        write_scores_csv(res, args.scores_csv)
    return EXIT_OK


_COMMANDS = {"fit": _cmd_fit, "bench": _cmd_bench, "mcerr": _cmd_mcerr, "diagnose": _cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"ifit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IfitError as exc:
        print(f"ifit: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
