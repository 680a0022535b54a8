import logging
import math
import sys
from argparse import SUPPRESS, ArgumentParser, ArgumentTypeError
from multiprocessing import cpu_count
from pathlib import Path
from typing import Sequence

from .__version__ import __version__
from .main import Command, RunConfig, main
from .primitives import Paths, ResourceError, ShearletError, UsageError
from .symbols import EllipseRegion
from .system import DEFAULT_MEMORY_BUDGET, Orientation
from .verify import SUITES

LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

ORIENT_CHOICES = {"h": (Orientation.HORIZONTAL,), "v": (Orientation.VERTICAL,), "both": tuple(Orientation)}


def _floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _ellipse(text: str) -> list[float]:
    values = _floats(text)
    if len(values) not in (3, 5):
        raise ArgumentTypeError(f"expected a,b,gamma or a,b,gamma,c1,c2, got {text!r}")
    return values


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _shear_range(text: str) -> tuple[int, ...]:
    """lo:hi, both ends included."""
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError:
        raise ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if hi < lo:
        raise ArgumentTypeError(f"empty shear range {text!r}")
    return tuple(range(lo, hi + 1))


def _common_arguments() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument(
        "-h",
        "--help",
        help="Show this help message and exit.",
        action="help",
        default=SUPPRESS,
    )
    common.add_argument("--b", dest="b", type=float, default=0.025, help="Window parameter b > 0. Defaults to 0.025.")
    common.add_argument("--j", dest="j", type=int, default=8, help="Even scale j >= 2. Defaults to 8.")
    common.add_argument("--s", dest="s", type=int, default=8, help="Translate grid exponent, 2^s x 2^s. Defaults to 8.")
    common.add_argument("--l", dest="shear", type=int, default=None, help="A single shear.")
    common.add_argument(
        "--l-range",
        dest="shear_range",
        type=_shear_range,
        default=None,
        help="Inclusive shear range lo:hi. Defaults to every shear with |l| < 2^(j/2).",
    )
    common.add_argument("--orient", dest="orient", choices=list(ORIENT_CHOICES), default=None)
    common.add_argument(
        "--ellipse",
        dest="ellipse",
        type=_ellipse,
        default=None,
        help="Ellipse a,b,gamma[,c1,c2] with gamma in radians. Defaults to 1,3,pi/6 when no table is given.",
    )
    common.add_argument("--gamma-deg", dest="gamma_deg", action="store_true", help="Read gamma in degrees.")
    common.add_argument(
        "--table", dest="table", type=Path, default=None, help="CSV of Fourier coefficients k1,k2,re,im."
    )
    common.add_argument(
        "--out", dest="out", type=Path, default=Path("./out"), help="Output directory. Defaults to './out'"
    )
    common.add_argument(
        "--cache",
        dest="cache",
        type=Path,
        nargs="?",
        default=None,
        const=Path("./cache"),
        help="Keep sampled symbols in this directory. Defaults to './cache'",
    )
    common.add_argument(
        "--threads",
        dest="threads",
        help="Parallelize over shears. If no thread count is specified, the number of cpu cores -1 is taken instead.",
        nargs="?",
        type=int,
        default=None,
        const=max(1, cpu_count() - 1),
    )
    common.add_argument(
        "--tol", dest="tol", type=float, default=None, help="Absolute tolerance for verify suites, defaults per suite."
    )
    common.add_argument("--j-list", dest="j_list", type=_int_list, default=(6, 8, 10), help="Scales for harnesses.")
    common.add_argument(
        "--memory", dest="memory_mib", type=int, default=DEFAULT_MEMORY_BUDGET >> 20, help="Memory budget in MiB."
    )
    common.add_argument("-v", "--verbose", dest="verbose", action="store_true", help="Log at DEBUG level.")
    return common


def build_parser() -> ArgumentParser:
    common = _common_arguments()
    parser = ArgumentParser(
        prog="tpshearlets",
        description=f"Trigonometric polynomial shearlet coefficients of cartoon-like images. v{__version__}",
        add_help=False,
    )
    parser.add_argument("-h", "--help", help="Show this help message and exit.", action="help", default=SUPPRESS)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser(Command.COEFF_MAP, parents=[common], add_help=False, help="One coefficient map.")
    commands.add_parser(Command.EDGE_MAP, parents=[common], add_help=False, help="Sum of |coefficient maps|.")
    verify = commands.add_parser(Command.VERIFY, parents=[common], add_help=False, help="Run a verification suite.")
    verify.add_argument("suite", choices=list(SUITES))
    commands.add_parser(Command.DECAY, parents=[common], add_help=False, help="Far-field decay across scales.")
    commands.add_parser(Command.RENDER, parents=[common], add_help=False, help="Coefficients over the region, as PPM.")
    return parser


def config_from_args(args) -> RunConfig:
    ellipse = None
    if args.ellipse is not None:
        a, b, gamma, *center = args.ellipse
        if args.gamma_deg:
            gamma = math.radians(gamma)
        ellipse = EllipseRegion(a, b, gamma, tuple(center) if center else (0.0, 0.0))

    if args.shear is not None and args.shear_range is not None:
        raise UsageError("--l and --l-range are mutually exclusive")
    shears = (args.shear,) if args.shear is not None else args.shear_range

    command = Command(args.command)
    orient = args.orient
    if orient is None:
        orient = "h" if command in (Command.COEFF_MAP, Command.RENDER) else "both"

    return RunConfig(
        command=command,
        paths=Paths(args.out, args.cache),
        b=args.b,
        j=args.j,
        shears=shears,
        orientations=ORIENT_CHOICES[orient],
        s=args.s,
        ellipse=ellipse,
        table=args.table,
        threads=args.threads,
        tol=args.tol,
        suite=getattr(args, "suite", None),
        j_list=args.j_list,
        memory_budget_bytes=args.memory_mib << 20,
    )


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()

    # Parse
    args, unknown = parser.parse_known_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="[%(levelname)s] (%(filename)s:%(lineno)s): %(message)s",
    )
    if unknown:
        LOG.warning(f"Ignoring unrecognized arguments: {' '.join(unknown)}")

    try:
        code = main(config_from_args(args))
    except ResourceError as e:
        LOG.error(str(e))
        code = EXIT_RESOURCE
    except ShearletError as e:
        LOG.error(str(e))
        code = EXIT_USAGE
    except OSError as e:
        LOG.error(f"I/O failure: {e}")
        code = EXIT_RESOURCE

    if argv is None:
        sys.exit(code)
    return code
