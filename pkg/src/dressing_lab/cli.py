"""Command line: ``dressing-lab [--out DIR] [--seed N] [--threads N] VERB ...``.

Verbs::

    run <config>                                   run one experiment
    residual --eq ID --field DUMP [--dfield DUMP]  residual of a dumped field
    converge <config> --levels N                   refinement study
    inspect <dump>                                 print a dump header

Exit status: 0 success, 1 validation failure, 2 solver failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import errors as E
from .config import load_config
from .fieldio import inspect_field, load_field, model_from_header
from .oracles import EQUATIONS, residual
from .runner import EXIT_IO, EXIT_OK, exit_code, reports_tsv, run_experiment


def _parser():
    p = argparse.ArgumentParser(prog="dressing-lab", description="Dressing-method experiment harness.")
    p.add_argument("--out", help="output directory (overrides run.out)")
    p.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    p.add_argument("--threads", type=int, default=1, help="worker pool size")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run the experiment described by a config")
    r.add_argument("config")
    r = sub.add_parser("residual", help="evaluate an equation residual on a dumped field")
    r.add_argument("--eq", required=True, choices=EQUATIONS)
    r.add_argument("--field", required=True)
    r.add_argument("--dfield", help="dump of the evolution derivative")
    r.add_argument("--stencil", type=int, default=4, choices=(2, 4))
    r = sub.add_parser("converge", help="grid refinement study")
    r.add_argument("config")
    r.add_argument("--levels", type=int, required=True)
    r = sub.add_parser("inspect", help="print a dump header without reading its payload")
    r.add_argument("dump")
    return p


def _fail(exc) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return exit_code(exc)


def _residual(args) -> int:
    d = load_field(args.field)
    m = model_from_header(d)
    if m is None:
        raise E.MissingDerivative("the dump carries no model entries (model.B.*)")
    fields = {"u": d.values}
    if args.dfield:
        fields["u_t"] = load_field(args.dfield).values
    reps = residual(args.eq, fields, m, d.grid, args.stencil)
    reps = list(reps) if isinstance(reps, tuple) else [reps]
    text = reports_tsv(reps)
    sys.stdout.write(text)
    if args.out:
        from pathlib import Path
        try:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "residual.tsv").write_text(text, encoding="utf-8")
        except OSError as exc:
            raise E.IoError(str(exc)) from None
    return EXIT_OK


def _inspect(args) -> int:
    d = inspect_field(args.dump)
    print(f"format\tDRSF 1")
    print(f"M\t{d.M}\nQ\t{d.Q}")
    print(f"counts\t{','.join(str(c) for c in d.counts)}")
    print(f"periods\t{','.join(repr(p) for p in d.periods)}")
    print(f"origin\t{','.join(repr(p) for p in d.origin)}")
    print(f"t\t{d.t!r}")
    if d.lambda1 is not None:
        print(f"lambda1\t{d.lambda1!r}")
    print(f"shape\t{d.shape}")
    for k, v in d.extra.items():
        print(f"{k}\t{v}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "inspect":
            return _inspect(args)
        if args.verb == "residual":
            return _residual(args)
        spec = load_config(args.config)
        if args.verb == "converge":
            if args.levels < 2:
                raise E.ParseError("--levels must be at least 2")
            spec = dataclasses.replace(spec, kind="converge-study", levels=args.levels)
        code, manifest = run_experiment(spec, out=args.out, seed=args.seed, threads=args.threads)
        print(f"manifest\t{manifest}")
        status = manifest.read_text(encoding="utf-8").split("\n")
        err = [line for line in status if line.startswith("error\t") and line != "error\t-"]
        if err:
            print(err[0], file=sys.stderr)
        return code
    except E.DressingLabError as exc:
        return _fail(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
