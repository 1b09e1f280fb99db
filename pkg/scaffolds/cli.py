"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a check fails or a computation cannot
finish (the report is still written), 2 for input errors.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import json
import logging
import math
import os
import random
import sys
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any

from scaffolds import hopf, numeric, scaffold, tower
from scaffolds.errors import FamilyPreconditionViolation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2

TOWER_CONFIGS = ((2, 2, 2), (2, 3, 2), (3, 2, 2))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else str(value)
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def _read_payload(path: str) -> dict[str, Any]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("input must be a JSON object")
    return data


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _summary(line: str, output: str | None) -> None:
    # keep stdout machine-readable when the report itself goes there
    print(line, file=sys.stdout if output else sys.stderr)


def _to_csv(rows: Sequence[dict[str, Any]]) -> str:
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _jsonable(v) for k, v in row.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------------------------
# tower sweep


def tower_case(p: int, n: int, d: int, seed: int, index: int, prec: int | None) -> dict[str, Any]:
    """Build one random tower and run every structural and scaffold check on it."""
    rng = random.Random(f"{seed}:{p}:{n}:{d}:{index}")
    spec = tower.random_tower_spec(p, n, d, rng, prec=prec)
    built = tower.tower_build(spec)
    sc = scaffold.theta_psi_build(built)
    exact = scaffold.verify_scaffold(sc, "exact")
    brute = tower.ramification_bruteforce(built)
    checks = tower.tower_checks(built)
    lam = scaffold.check_lambda_basis(sc)
    ok = (
        exact["cases_failed"] == 0
        and brute == list(built.lower)
        and all(v is not False for v in checks.values())
        and all(lam.values())
    )
    return {
        "p": p,
        "n": n,
        "d": d,
        "index": index,
        "breaks_lower": list(built.lower),
        "bruteforce_breaks": brute,
        "scaffold_failures": exact["cases_failed"],
        "checks": checks,
        "lambda_basis": lam,
        "ok": ok,
    }


async def _run_cases(cases: list[tuple[Any, ...]], jobs: int) -> list[dict[str, Any]]:
    sem = asyncio.Semaphore(jobs)
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=jobs) as pool:

        async def _one(args: tuple[Any, ...]) -> dict[str, Any]:
            async with sem:
                return await loop.run_in_executor(pool, tower_case, *args)

        tasks = [asyncio.create_task(_one(c)) for c in cases]
        return list(await asyncio.gather(*tasks))


def sweep_towers(
    count: int,
    seed: int,
    jobs: int = 1,
    prec: int | None = None,
    configs: Sequence[tuple[int, int, int]] = TOWER_CONFIGS,
) -> list[dict[str, Any]]:
    """Random tower cases in canonical (config, index) order regardless of ``jobs``."""
    cases = [(p, n, d, seed, i, prec) for p, n, d in configs for i in range(count)]
    if jobs <= 1:
        results = []
        for c in cases:
            results.append(tower_case(*c))
            logger.info("tower case p=%d n=%d #%d done", c[0], c[1], c[4])
        return results
    return asyncio.run(_run_cases(cases, jobs))


# --------------------------------------------------------------------------------------------
# subcommands


def _cmd_analyze(args: argparse.Namespace) -> int:
    payload = _read_payload(args.input)
    if args.tolerance is not None:
        payload["tolerance"] = args.tolerance
    if args.family:
        payload["families"] = args.family
    result = numeric.handle_request(payload)["result"]
    _write(json.dumps(_jsonable(result), indent=2), args.output)
    verdicts = ", ".join(f"{v['family']}={v['status']}" for v in result["verdicts"]) or "none"
    breaks = result["breaks"]["breaks_lower"]
    _summary(f"[analyze] breaks={breaks} verdicts: {verdicts}", args.output)
    return EXIT_OK


def _cmd_build(args: argparse.Namespace) -> int:
    result = tower.handle_request(_read_payload(args.input))["result"]
    _write(json.dumps(_jsonable(result), indent=2), args.output)
    status = "OK" if result["ok"] else "FAIL"
    _summary(f"[build] {status} breaks={result['breaks_lower']}", args.output)
    return EXIT_OK if result["ok"] else EXIT_CHECK_FAILED


def _cmd_scaffold(args: argparse.Namespace) -> int:
    payload = {
        "tower": _read_payload(args.input),
        "mode": args.mode,
        "tolerance": args.tolerance,
        "gap": args.gap,
    }
    result = scaffold.handle_request(payload)["result"]
    _write(json.dumps(_jsonable(result), indent=2), args.output)
    status = "OK" if result["ok"] else "FAIL"
    _summary(
        f"[scaffold] {status} mode={result['mode']} "
        f"failed={result['cases_failed']}/{result['cases_total']}",
        args.output,
    )
    return EXIT_OK if result["ok"] else EXIT_CHECK_FAILED


def _cmd_freeness(args: argparse.Namespace) -> int:
    from scaffolds.schemas import FamilyModel

    payload = _read_payload(args.input)
    if args.family:
        payload["family"] = args.family
    model = FamilyModel.model_validate(payload)
    try:
        verdict = numeric.freeness(model.family, model.params)
        result = {"family": model.family, **verdict.as_dict()}
    except FamilyPreconditionViolation as exc:
        result = {
            "family": model.family,
            "status": str(numeric.Status.OUT_OF_SCOPE),
            "reason": str(exc),
        }
    _write(json.dumps(_jsonable(result), indent=2), args.output)
    _summary(f"[freeness] {model.family}: {result['status']}", args.output)
    return EXIT_OK


def _cmd_hopf(args: argparse.Namespace) -> int:
    payload = _read_payload(args.input)
    payload["strict"] = args.strict
    result = hopf.handle_request(payload)["result"]
    _write(json.dumps(_jsonable(result), indent=2), args.output)
    status = "OK" if result["ok"] else "FAIL"
    _summary(f"[hopf] {status} M={result['M']}", args.output)
    return EXIT_OK if result["ok"] else EXIT_CHECK_FAILED


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.family == "towers":
        rows = sweep_towers(args.count, args.seed, args.jobs, args.prec)
        _write(json.dumps(_jsonable(rows), indent=2), args.output)
        failed = sum(1 for r in rows if not r["ok"])
        _summary(f"[sweep] towers: {len(rows) - failed}/{len(rows)} passed", args.output)
        return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED

    rows = numeric.NUMERIC_SWEEPS[args.family]()
    _write(_to_csv(rows), args.output)
    failed = 0
    if args.family == "martel_agreement":
        failed = sum(1 for r in rows if r["agree"] is False)
        failed += sum(1 for r in rows if r["exception"] and r["biquadratic"] != "Undetermined")
    _summary(f"[sweep] {args.family}: {len(rows)} rows, {failed} disagreements", args.output)
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


# --------------------------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scaffolds", description="Galois scaffolds on Artin-Schreier towers."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def _with_io(p: argparse.ArgumentParser, needs_input: bool = True) -> argparse.ArgumentParser:
        if needs_input:
            p.add_argument("input", help="input JSON file, '-' for stdin")
        p.add_argument("-o", "--output", default=None, help="report path (default stdout)")
        return p

    p_an = _with_io(sub.add_parser("analyze", help="breaks, assumptions, tolerances, verdicts"))
    p_an.add_argument("--tolerance", type=int, default=None)
    p_an.add_argument("--family", action="append", choices=numeric.FREENESS_FAMILIES)
    p_an.set_defaults(func=_cmd_analyze)

    p_b = _with_io(sub.add_parser("build", help="build a tower and report its invariants"))
    p_b.set_defaults(func=_cmd_build)

    p_s = _with_io(sub.add_parser("scaffold", help="verify scaffold identities"))
    p_s.add_argument("--mode", choices=("exact", "tolerance"), default="exact")
    p_s.add_argument("--tolerance", type=int, default=None)
    p_s.add_argument("--gap", type=int, default=None, help="also run the perturbation at this gap")
    p_s.set_defaults(func=_cmd_scaffold)

    p_f = _with_io(sub.add_parser("freeness", help="freeness verdict for one family"))
    p_f.add_argument("--family", choices=numeric.FREENESS_FAMILIES, default=None)
    p_f.set_defaults(func=_cmd_freeness)

    p_h = _with_io(sub.add_parser("hopf", help="Hopf order parameters and verification"))
    p_h.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True)
    p_h.set_defaults(func=_cmd_hopf)

    p_w = _with_io(sub.add_parser("sweep", help="grids and randomized suites"), needs_input=False)
    p_w.add_argument(
        "--family", choices=(*numeric.NUMERIC_SWEEPS, "towers"), default="biquadratic"
    )
    p_w.add_argument("--seed", type=int, default=0)
    p_w.add_argument("--count", type=int, default=25, help="towers per configuration")
    p_w.add_argument(
        "--jobs", type=int, default=int(os.getenv("SCAFFOLDS_JOBS", "1")), help="worker processes"
    )
    p_w.add_argument("--prec", type=int, default=None, help="tower working precision")
    p_w.set_defaults(func=_cmd_sweep)
    return parser


def _configure_logging(verbose: bool) -> None:
    level = "DEBUG" if verbose else os.getenv("SCAFFOLDS_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _error(msg: str) -> None:
    print(json.dumps({"status": "error", "error": {"msg": msg}}), file=sys.stderr)


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT_ERROR if exc.code else EXIT_OK
    _configure_logging(args.verbose)
    try:
        return int(args.func(args))
    except (ValueError, OSError) as exc:
        _error(str(exc))
        return EXIT_INPUT_ERROR
    except (RuntimeError, ArithmeticError) as exc:
        logger.exception("command %s failed", args.command)
        _error(str(exc))
        return EXIT_CHECK_FAILED


def main() -> None:
    sys.exit(run_command())
