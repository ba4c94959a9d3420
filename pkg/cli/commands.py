# cli/commands.py
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from rich.table import Table

from config.log import configure_logging, stderr_console
from config.settings import TOOL_NAME, TOOL_VERSION, settings
from core import services
from core.exceptions import InvalidRadiiError, MeshFormatError, PackingError, VertexIndexError
from core.schemas import SuiteResult
from core.services import EXIT_DOMAIN_FAILURE, EXIT_INPUT_ERROR, CommandOutcome
from core.tetgeom import Geometry
from meshes.loader import file_digest

logger = logging.getLogger(__name__)

INPUT_ERRORS = (MeshFormatError, InvalidRadiiError, VertexIndexError, OSError)
FILE_ARGUMENTS = ("mesh", "radii_file", "target", "init")


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        stderr_console.print(f"[bold red]error:[/bold red] {message}", highlight=False)
        sys.exit(EXIT_INPUT_ERROR)


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--log-level", default=None, help=f"logging level (default {settings.LOG_LEVEL})")

    geometry = ArgumentParser(add_help=False)
    geometry.add_argument(
        "--geometry", type=Geometry, default=Geometry.EUCLIDEAN, metavar="{euclidean,hyperbolic}",
        help="background geometry (default euclidean)",
    )

    alpha = ArgumentParser(add_help=False)
    alpha.add_argument("--alpha", type=float, default=None, help="curvature exponent (default 0)")

    seeded = ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None, help=f"random seed (default {settings.DEFAULT_SEED})")

    parser = ArgumentParser(prog=TOOL_NAME, description="Sphere packing metrics on closed triangulated 3-manifolds.")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("validate", parents=[common], help="check face incidence and connectivity")
    p.add_argument("mesh")

    p = sub.add_parser("curvature", parents=[common, geometry, alpha], help="K, R_alpha and the Jacobian spectrum")
    p.add_argument("mesh")
    p.add_argument("radii_file", metavar="radii")

    p = sub.add_parser("admissible", parents=[common, geometry], help="label every tetrahedron")
    p.add_argument("mesh")
    p.add_argument("radii_file", metavar="radii")

    p = sub.add_parser("classify", parents=[common, geometry], help="label one tetrahedron given 4 radii")
    p.add_argument("radii", type=float, nargs=4)

    p = sub.add_parser("boundary", parents=[common, geometry], help="critical inner radius for 3 radii")
    p.add_argument("radii", type=float, nargs=3)

    p = sub.add_parser("solve", parents=[common, geometry, alpha, seeded], help="solve for a prescribed curvature")
    p.add_argument("mesh")
    p.add_argument("--target", required=True, help="target document")
    p.add_argument("--init", default=None, help="initial radii document (default all ones)")
    p.add_argument("--tol", type=float, default=None, help=f"gradient tolerance (default {settings.GRADIENT_TOLERANCE})")

    p = sub.add_parser("rigidity", parents=[common, geometry, alpha], help="spectral certificate of Hess F")
    p.add_argument("mesh")
    p.add_argument("radii_file", metavar="radii")
    p.add_argument("--target", default=None, help="target document (default: the metric's own curvature)")

    p = sub.add_parser("experiment", parents=[common, geometry, alpha, seeded], help="multistart uniqueness check")
    p.add_argument("mesh")
    p.add_argument("--trials", type=int, default=settings.DEFAULT_TRIALS)

    p = sub.add_parser("selftest", parents=[common, seeded], help="run every acceptance suite")

    return parser


# --- Handlers ---

def _seed(args) -> int:
    return args.seed if args.seed is not None else settings.DEFAULT_SEED


def _alpha(args) -> float:
    return args.alpha if args.alpha is not None else 0.0


def _print_suites(rows: List[tuple]) -> None:
    table = Table(title="selftest")
    table.add_column("suite")
    table.add_column("result")
    table.add_column("time (s)", justify="right")
    table.add_column("detail", overflow="fold")
    for result, elapsed in rows:
        status = "[bold green]PASS[/bold green]" if result.passed else "[bold red]FAIL[/bold red]"
        table.add_row(result.name, status, f"{elapsed:.1f}", result.detail)
    stderr_console.print(table)


def handle_selftest(args) -> CommandOutcome:
    rows = []

    def on_result(result: SuiteResult, elapsed: float) -> None:
        rows.append((result, elapsed))
        logger.info("suite %s: %s", result.name, "PASS" if result.passed else "FAIL")

    outcome = services.selftest_report(_seed(args), on_result=on_result)
    _print_suites(rows)
    return outcome


HANDLERS = {
    "validate": lambda a: services.validate_mesh(a.mesh),
    "curvature": lambda a: services.curvature_report(a.mesh, a.radii_file, a.geometry, _alpha(a)),
    "admissible": lambda a: services.admissibility_report(a.mesh, a.radii_file, a.geometry),
    "classify": lambda a: services.classify_report(a.radii, a.geometry),
    "boundary": lambda a: services.boundary_report(a.radii, a.geometry),
    "solve": lambda a: services.solve_report(a.mesh, a.target, a.geometry, a.alpha, a.init, a.tol, _seed(a)),
    "rigidity": lambda a: services.rigidity_report(a.mesh, a.radii_file, a.geometry, a.alpha, a.target),
    "experiment": lambda a: services.experiment_report(
        a.mesh, a.geometry, _alpha(a), a.trials, _seed(a), progress=stderr_console.is_terminal
    ),
    "selftest": handle_selftest,
}


# --- Dispatch ---

def _header_fields(args) -> Dict:
    return dict(
        geometry=getattr(args, "geometry", None),
        alpha=_alpha(args) if hasattr(args, "alpha") else None,
        seed=_seed(args) if hasattr(args, "seed") else None,
    )


def _file_inputs(args) -> Dict[str, str]:
    inputs = {}
    for name in FILE_ARGUMENTS:
        path = getattr(args, name, None)
        if isinstance(path, str):
            try:
                inputs[name.removesuffix("_file")] = file_digest(path)
            except OSError:
                pass
    return inputs


def _write(out: Optional[str], text: str) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    fields = _header_fields(args)

    try:
        outcome = HANDLERS[args.command](args)
    except INPUT_ERRORS as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_INPUT_ERROR
    except PackingError as e:
        logger.error("%s failed: %s", args.command, e)
        header = services.make_header(args.command, inputs=_file_inputs(args), **fields)
        _write(args.out, services.render_report(header, services.error_body(e)))
        return EXIT_DOMAIN_FAILURE

    if outcome.alpha is not None:
        fields["alpha"] = outcome.alpha
    header = services.make_header(args.command, inputs=outcome.inputs, **fields)
    _write(args.out, services.render_report(header, outcome.body))
    return outcome.exit_code
