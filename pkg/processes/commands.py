"""Module with the four commands: eval, characteristic, cone-decay and verify"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from helpers import config
from helpers.characteristic import bump_characteristic_sup
from helpers.exceptions import CheckFailure, EmptyFamilyError, FitError, ValidationError
from helpers.grid import GridFunction, make_rectangle
from helpers.operators import (
    OperatorOutput,
    check_guard,
    cone_operator,
    cone_sum,
    joint_fractional_integral,
    strong_fractional_integral,
    strong_fractional_integral_direct,
)
from helpers.run_functions import read_grid_function, write_csv, write_grid_function, write_json, write_xlsx
from helpers.verify import (
    DecayReport,
    QuantityKind,
    build_corpus,
    characteristic_decay_profile,
    cone_norm_profile,
    fit_decay_rate,
    ratio_hypothesis_scan,
)
from processes import acceptance
from processes.run_config import RunConfig
from processes.task_queue import run_concurrently

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------
# Inputs
# --------------------------------------------------------------------
def build_input(run: RunConfig) -> GridFunction:
    """The operator input described by the `input` section."""
    spec = run.input_spec
    grid = run.grid
    kind = spec["kind"]

    if kind == "zero":
        return GridFunction.zeros(grid)

    if kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", run.seed)))
        return GridFunction(grid, 1.0 - rng.random(grid.size))

    if kind == "indicator":
        r = make_rectangle(
            grid,
            spec.get("q_corner", [0] * grid.n),
            spec.get("q_side", 1),
            spec.get("p_corner", [0] * grid.m),
            spec.get("p_side", 1),
        )
        block = np.zeros(grid.shape)
        block[r.slices] = 1.0
        return GridFunction(grid, block)

    if "path" not in spec:
        raise ValidationError("file input needs a path")
    f = read_grid_function(Path(spec["path"]))
    if f.grid != grid:
        raise ValidationError(f"input file {spec['path']} does not match the run grid")
    return f


def _apply_operator(run: RunConfig, f: GridFunction) -> OperatorOutput:
    cfg, rule = run.exponents, run.self_cell_rule
    if run.operator == "strong":
        return strong_fractional_integral(f, cfg, rule)
    if run.operator == "joint":
        return joint_fractional_integral(f, cfg)
    if run.operator == "cone":
        return cone_operator(f, cfg, int(run.ell), rule)
    return cone_sum(f, cfg, *run.ell_range, rule)


def _relative_discrepancy(fast: np.ndarray, direct: np.ndarray) -> float:
    scale = float(np.linalg.norm(direct))
    gap = float(np.linalg.norm(fast - direct))
    return gap if scale == 0.0 else gap / scale


# --------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------
async def cmd_eval(run: RunConfig, out_dir: Path) -> int:
    """Evaluate the configured operator and write it as a GridFunction file."""
    cfg = run.exponents
    if run.oracle:
        if run.operator != "strong":
            raise ValidationError("--oracle compares the strong operator only")
        check_guard(run.grid)

    f = build_input(run)
    logger.info("Evaluating %s operator on %d product cells", run.operator, run.grid.size)
    output = _apply_operator(run, f)

    metadata = {
        "operator": run.operator,
        "exponents": cfg.to_dict(),
        "self_cell_rule": run.self_cell_rule.value if run.self_cell_rule else None,
        **output.metadata(),
    }
    write_grid_function(out_dir / "eval_result.bin", output.result, metadata)

    report = {"command": "eval", "grid": run.grid.to_dict(), **metadata}
    if run.oracle:
        direct = strong_fractional_integral_direct(f, cfg, run.self_cell_rule).result
        discrepancy = _relative_discrepancy(output.result.values, direct.values)
        report["oracle"] = {"discrepancy": discrepancy, "tolerance": config.ORACLE_TOL}
        logger.info("Oracle discrepancy %.3e", discrepancy)
        print(f"oracle discrepancy: {discrepancy:.3e}")
    write_json(out_dir / "eval_report.json", report)
    return config.EXIT_OK


async def cmd_characteristic(run: RunConfig, out_dir: Path) -> int:
    """Supremum of the bump characteristic over the configured rectangle family."""
    cfg, t = run.exponents, run.t
    weights = run.weight_family()
    w = weights.sample(run.grid)
    report = bump_characteristic_sup(
        w,
        cfg,
        t,
        run.rectangle_filter,
        use_q_form=bool(run.use_q_form),
        keep_table=bool(run.keep_table),
    )
    logger.info("Characteristic over %s: %.6g (%d rectangles)", report.family, report.value, report.family_size)

    document = {
        "command": "characteristic",
        "grid": run.grid.to_dict(),
        "exponents": {**cfg.to_dict(), "t": t},
        "weights": weights.to_dict(),
        "use_q_form": bool(run.use_q_form),
        "report": report.to_dict(),
    }
    if int(run.ell) >= 1:
        try:
            document["hypothesis_scan"] = ratio_hypothesis_scan(w, cfg, t, int(run.ell))
        except EmptyFamilyError as e:
            logger.warning("Ratio scan skipped: %s", e)
            document["hypothesis_scan"] = {"probes": 0, "skipped": str(e)}
    write_json(out_dir / "characteristic_report.json", document)
    if report.per_rectangle_values is not None:
        write_csv(out_dir / "characteristic_table.csv", report.per_rectangle_values)
    return config.EXIT_OK


def _self_test_report(run: RunConfig) -> DecayReport:
    ells = tuple(range(run.ell_range[0], run.ell_range[1] + 1))
    eps = float(run.injected_eps)
    return DecayReport(ells, tuple(2.0 ** (-eps * abs(e)) for e in ells), QuantityKind.NORM_RATIO)


def _fit_or_keep(report: DecayReport) -> DecayReport:
    try:
        return fit_decay_rate(report)
    except FitError as e:
        logger.warning("Profile left unfitted: %s", e)
        return report


def _write_decay(out_dir: Path, name: str, report: DecayReport, extra: dict) -> None:
    write_json(out_dir / f"{name}.json", {**extra, "report": report.to_dict()})
    write_csv(out_dir / f"{name}.csv", report.to_frame())


async def cmd_cone_decay(run: RunConfig, out_dir: Path) -> int:
    """Per-eccentricity profiles and their fitted decay rates."""
    extra = {"command": "cone-decay", "grid": run.grid.to_dict(), "ell_range": list(run.ell_range)}

    if run.self_test:
        report = fit_decay_rate(_self_test_report(run))
        _write_decay(out_dir, "decay_self_test", report, {**extra, "injected_eps": float(run.injected_eps)})
        error = abs(report.fitted_eps - float(run.injected_eps))
        if error > 1e-9:
            raise CheckFailure(f"self-test recovered {report.fitted_eps!r}, injected {run.injected_eps!r}")
        logger.info("Self-test recovered the injected rate to %.1e", error)
        return config.EXIT_OK

    cfg, t = run.exponents, run.t
    weights = run.weight_family()
    w = weights.sample(run.grid)
    extra = {**extra, "exponents": {**cfg.to_dict(), "t": t}, "weights": weights.to_dict()}

    tasks = []
    if run.profile in ("characteristic", "both"):
        tasks.append(("decay_characteristic", lambda: characteristic_decay_profile(w, cfg, t, run.ell_range)))
    if run.profile in ("norm", "both"):
        check_guard(run.grid)
        spec = run.corpus_spec
        corpus = build_corpus(run.grid, spec["kind"], spec.get("count"), int(run.seed))
        extra["corpus"] = {"kind": spec["kind"], "size": len(corpus)}
        tasks.append(
            ("decay_norm", lambda: cone_norm_profile(w, cfg, run.ell_range, corpus, run.self_cell_rule))
        )

    results = await run_concurrently(tasks, int(run.threads))
    for name, report in results.items():
        fitted = _fit_or_keep(report)
        _write_decay(out_dir, name, fitted, extra)
        logger.info("%s: fitted decay rate %s", name, fitted.fitted_eps)
    return config.EXIT_OK


async def cmd_verify(run: RunConfig, out_dir: Path, list_only: bool = False, calibrate: bool = False) -> int:
    """Run the verification checks and write a summary."""
    checks = acceptance.select_checks(run.checks)

    if list_only:
        for item in checks:
            marker = " (calibrated)" if item.calibrated else ""
            print(f"{item.name}{marker}: {item.description}")
        return config.EXIT_OK

    calibration_path = Path(run.calibration_path)
    if calibrate:
        document = acceptance.calibrate(int(run.seed), calibration_path)
        write_json(out_dir / "calibration_run.json", document)
        return config.EXIT_OK

    constants = acceptance.load_calibration(calibration_path)["constants"]
    seed = int(run.seed)
    results = await run_concurrently(
        [(item.name, lambda item=item: item.run(seed, constants)) for item in checks],
        int(run.threads),
    )
    ordered = [results[item.name] for item in checks]

    summary = {
        "command": "verify",
        "seed": seed,
        "calibration": str(calibration_path),
        "checks": [r.to_dict() for r in ordered],
        "passed": all(r.passed for r in ordered),
    }
    write_json(out_dir / "verify_summary.json", summary)
    table = pd.DataFrame(
        {"check": [r.name for r in ordered], "passed": [r.passed for r in ordered]},
        columns=["check", "passed"],
    )
    write_csv(out_dir / "verify_summary.csv", table)
    if run.xlsx:
        write_xlsx(out_dir / "verify_summary.xlsx", {"checks": table})

    failed = [r.name for r in ordered if not r.passed]
    if failed:
        raise CheckFailure(f"failed checks: {', '.join(failed)}")
    logger.info("All %d checks passed", len(ordered))
    return config.EXIT_OK
