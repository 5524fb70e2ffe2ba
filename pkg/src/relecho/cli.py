"""Command-line front end: ``relecho <command> CONFIG [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical guard tripped,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from . import output, scenario
from .errors import NumericalGuardError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_GUARD, EXIT_IO = 0, 2, 3, 4

COMMANDS = {
    "run": "full pipeline: simulated fidelity, prediction and fit report",
    "validate": "parse and validate a scenario without computing",
    "spectrum": "Landau energies with their degenerate label sets",
    "evolve": "fidelity series for the configured methods",
    "perturbative": "coefficient C, predicted decay and boost check",
    "kg": "Klein-Gordon toy: direct and echo-kernel fidelity",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relecho", description="Fidelity decay of relativistic Landau states.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("config_path", nargs="?", metavar="CONFIG", help="scenario file")
        p.add_argument("--config", dest="config_opt", metavar="PATH", help="scenario file (alternative to CONFIG)")
        p.add_argument("--out", metavar="DIR", help="output directory (default: [output] directory or .)")
        p.add_argument("--threads", type=int, metavar="N", help="limit BLAS threads")
        p.add_argument("--seed", type=int, metavar="U64", help="override scenario.seed")
        p.add_argument("--strict", action="store_true", help="treat warnings as errors")
    return parser


def _spectrum(sc, out: Path) -> list[Path]:
    levels = scenario.spectrum(sc)
    rows = [
        (lvl.energy, lvl.nu, lvl.degeneracy, " ".join(f"{q.s:+d}:{q.ml}" for q in lvl.states))
        for lvl in levels
    ]
    for r in rows:
        print(f"E={r[0]:.12g} nu={r[1]} degeneracy={r[2]} states(s:ml)={r[3]}")
    return [output.write_table(out / "spectrum.csv", ("energy", "nu", "degeneracy", "states"), rows)]


def _evolve(sc, out: Path) -> list[Path]:
    series = scenario.simulate(sc)
    return [output.write_series(out / f"fidelity_{s.method}.csv", [s]) for s in series]


def _fit_rows(res) -> list[tuple]:
    rows = [
        ("strength", 0.0, res.strength),
        ("C", 0.0, res.C),
        ("predicted_coefficient", res.prediction_k, res.predicted_coefficient),
    ]
    if res.oscillatory_bound is not None:
        rows += [("oscillatory_bound", 0.0, res.oscillatory_bound), ("crossover_time", 0.0, res.crossover_time)]
    if res.fit is not None:
        rows += [
            ("fit_coefficient", res.prediction_k, res.fit.coefficient),
            ("fit_quartic", res.prediction_k, res.fit.quartic),
            ("fit_residual_rms", res.prediction_k, res.fit.residual_rms),
            ("fit_points", res.prediction_k, res.fit.points),
            ("fit_rel_error", res.prediction_k, res.fit_error),
        ]
    if res.convergence is not None:
        rows += [
            ("C_enlarged_truncation", 0.0, res.convergence.C_enlarged),
            ("truncation_change", 0.0, res.convergence.change),
            ("truncation_converged", 0.0, res.convergence.converged),
        ]
    for b in res.boosts:
        rows += [
            ("boost_expected_ratio", b.k, b.expected),
            ("boost_C_ratio", b.k, b.c_ratio),
            ("boost_C_ratio_lab_static", b.k, b.c_ratio_lab_static),
            ("compton_valid", b.k, b.compton.valid),
        ]
        if b.report is not None:
            rows += [
                ("boost_fit_ratio", b.k, b.report.ratio),
                ("boost_rel_error", b.k, b.report.rel_error),
                ("boost_passed", b.k, b.report.passed),
            ]
    return rows


def _perturbative(sc, out: Path, fit: bool = True):
    res = scenario.perturbative(sc, fit=fit)
    files = [
        output.write_series(out / "prediction.csv", [res.prediction]),
        output.write_table(out / "fit_report.csv", ("quantity", "k", "value"), _fit_rows(res)),
    ]
    print(f"C={res.C:.12g} strength={res.strength:.6g}")
    if res.fit_error is not None:
        print(f"fitted/predicted decay coefficient - 1 = {res.fit.coefficient / res.predicted_coefficient - 1:+.3e}")
    for b in res.boosts:
        status = "n/a" if b.report is None else f"ratio={b.report.ratio:.6f} ({'pass' if b.report.passed else 'FAIL'})"
        print(f"k={b.k:g}: expected {b.expected:.6f}, {status}")
    return files, res


def _kg(sc, out: Path) -> list[Path]:
    res = scenario.kg(sc)
    print(f"kernel vs direct max |df| = {res.max_difference:.3e}")
    return [output.write_series(out / "kg_fidelity.csv", [res.direct, res.kernel])]


def _run(sc, out: Path) -> list[Path]:
    files = []
    if sc.particle is not None:
        series = scenario.simulate(sc)
        files += [output.write_series(out / f"fidelity_{s.method}.csv", [s]) for s in series]
        pfiles, _ = _perturbative(sc, out, fit=True)
        files += pfiles
    if sc.kg is not None:
        files += _kg(sc, out)
    return files


def execute(args) -> int:
    path = args.config_opt or args.config_path
    if path is None:
        print("relecho: a scenario file is required (CONFIG or --config)", file=sys.stderr)
        return EXIT_INVALID
    if args.threads is not None and args.threads < 1:
        print("relecho: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    start = time.perf_counter()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"relecho: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    with warnings.catch_warnings():
        if args.strict:
            warnings.simplefilter("error")
        try:
            sc = scenario.parse(text, str(path)).with_seed(args.seed)
            if args.command == "validate":
                print(f"{path}: valid")
                return EXIT_OK
            out = Path(args.out or sc.output or ".")
            with _thread_limit(args.threads):
                if args.command == "perturbative":
                    files, _ = _perturbative(sc, out)
                else:
                    files = {"run": _run, "spectrum": _spectrum, "evolve": _evolve, "kg": _kg}[args.command](sc, out)
            output.write_manifest(
                out / "manifest.txt",
                {
                    "command": args.command,
                    "config": Path(path).name,
                    "config_sha256": output.config_hash(text),
                    "seed": sc.seed,
                    "version": __version__,
                    "files": ",".join(f.name for f in files),
                    "wall_time_s": time.perf_counter() - start,
                },
            )
        except ValidationError as exc:
            print(f"relecho: invalid scenario: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except NumericalGuardError as exc:
            print(f"relecho: numerical guard ({type(exc).__name__}): {exc}", file=sys.stderr)
            return EXIT_GUARD
        except Warning as exc:
            print(f"relecho: warning treated as error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except OSError as exc:
            print(f"relecho: I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


@contextlib.contextmanager
def _thread_limit(n):
    if n is None:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
