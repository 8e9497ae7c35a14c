"""
This is the main entry point for the command-line tool
"""

import argparse
import asyncio
import logging
import sys
from datetime import datetime
from pathlib import Path

from mbu_rpa_core.exceptions import BusinessError, ProcessError

from helpers import config
from helpers.run_functions import init_logger
from processes.commands import cmd_characteristic, cmd_cone_decay, cmd_eval, cmd_verify
from processes.error_handling import ErrorContext, handle_error
from processes.finalize_process import finalize_process
from processes.run_config import RunConfig

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration document")
    common.add_argument("--out", type=Path, default=Path("out"), help="directory for reports")
    common.add_argument("--seed", type=int, help="seed for corpora and random inputs")
    common.add_argument("--threads", type=int, help="upper bound on concurrent tasks")
    common.add_argument("--verbose", action="store_true", help="log at DEBUG level")

    parser = argparse.ArgumentParser(
        prog="fracint",
        description="Strong fractional integrals, bump characteristics and cone decay on product grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    eval_parser = sub.add_parser("eval", parents=[common], help="evaluate a fractional integral")
    eval_parser.add_argument("--oracle", action="store_true", help="compare with the direct double sum")
    eval_parser.add_argument("--operator", choices=["strong", "joint", "cone", "cone_sum"])
    eval_parser.add_argument("--ell", type=int, help="cone index for --operator cone")

    char_parser = sub.add_parser("characteristic", parents=[common], help="bump characteristic supremum")
    char_parser.add_argument("--filter", choices=["ALL", "ECCENTRICITY", "DIAGONAL"], dest="family")
    char_parser.add_argument("--ell", type=int, help="eccentricity for ECCENTRICITY, dilation for the ratio scan")
    char_parser.add_argument("--q-form", action="store_true", help="use the averaged p <= q form")
    char_parser.add_argument("--table", action="store_true", help="write the per-rectangle CSV table")

    decay_parser = sub.add_parser("cone-decay", parents=[common], help="decay profiles over eccentricities")
    decay_parser.add_argument("--profile", choices=["characteristic", "norm", "both"])
    decay_parser.add_argument("--self-test", action="store_true", help="fit a synthetic exponential")
    decay_parser.add_argument("--ell-min", type=int)
    decay_parser.add_argument("--ell-max", type=int)

    verify_parser = sub.add_parser("verify", parents=[common], help="run the verification checks")
    verify_parser.add_argument("--list", action="store_true", help="print the check inventory and exit")
    verify_parser.add_argument("--calibrate", action="store_true", help="re-measure and rewrite calibration")
    verify_parser.add_argument("--check", action="append", dest="checks", help="run only this check")
    verify_parser.add_argument("--xlsx", action="store_true", help="also write the summary as a workbook")

    return parser


def overrides_from(args: argparse.Namespace) -> dict:
    """Configuration fields set on the command line."""
    overrides = {}
    for name in ("seed", "threads", "operator", "profile", "ell_min", "ell_max", "checks"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    for flag, key in (("oracle", "oracle"), ("q_form", "use_q_form"), ("table", "keep_table"),
                      ("self_test", "self_test"), ("xlsx", "xlsx")):
        if getattr(args, flag, False):
            overrides[key] = True
    if getattr(args, "ell", None) is not None:
        overrides["ell"] = args.ell
    if getattr(args, "family", None) is not None:
        overrides["filter"] = {"kind": args.family, "ell": getattr(args, "ell", None)}
    return overrides


async def run_command(args: argparse.Namespace) -> int:
    run = RunConfig.load(args.config, overrides_from(args))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("Running %s into %s", args.command, out_dir)

    if args.command == "eval":
        return await cmd_eval(run, out_dir)
    if args.command == "characteristic":
        return await cmd_characteristic(run, out_dir)
    if args.command == "cone-decay":
        return await cmd_cone_decay(run, out_dir)
    return await cmd_verify(run, out_dir, list_only=args.list, calibrate=args.calibrate)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    init_logger(logging.DEBUG if args.verbose else config.LOG_LEVEL)
    started = datetime.now()
    context = ErrorContext(command=args.command, out_dir=args.out)

    try:
        try:
            exit_code = asyncio.run(run_command(args))

        except (BusinessError, ProcessError):
            raise

        except Exception as e:
            pe = ProcessError(str(e))
            raise pe from e

    except BusinessError as e:
        exit_code = handle_error(error=e, log=logger.error, context=context)

    except ProcessError as e:
        exit_code = handle_error(error=e, log=logger.error, context=context)

    if not getattr(args, "list", False):
        try:
            finalize_process(args.out, args.command, started, exit_code)
        except OSError as e:
            logger.warning("Could not write run info: %s", e)

    return exit_code


if __name__ == "__main__":
    sys.exit(main())
