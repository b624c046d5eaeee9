"""Command-line pipelines: build matrices, score rewards, run selection
reports, drive the simulation lab, and fetch candidates from a provider.

Exit codes: 0 success, 1 partial per-task failures, 2 usage/config errors.
Artifacts are line-delimited JSON or CSV; identical inputs and seed produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import shlex
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import files
from .core import KIND_CODE, KIND_TEST
from .errors import (
    AuthError,
    GatewayError,
    InterpreterMissing,
    ShapeError,
)
from .gateway import ProviderConfig, SamplingConfig, generate
from .harness import RunSpec, build_matrix
from .rewards import REWARD_MODES, assign_group_rewards
from .selection import code_accuracy, estimated_test_validity, grid_eval, select_best
from .theory import (
    GenerativeProcess,
    coevolve_sim,
    estimator_check,
    precision_mc,
)

logger = logging.getLogger("coevo")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    """Merged file/flag configuration for one command invocation."""

    run_spec: RunSpec = field(default_factory=RunSpec)
    reward_mode: str = "theoretical"
    long_cot: bool = False
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    provider: Optional[ProviderConfig] = None
    seed: Optional[int] = None
    workers: Optional[int] = None

    def require_paths(self, *paths: Optional[str]) -> None:
        for path in paths:
            if path is not None and not Path(path).exists():
                raise ConfigError(f"path does not exist: {path}")


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(text)
    elif p.suffix == ".json":
        data = json.loads(text)
    else:
        raise ConfigError(f"config file must be .yaml/.yml/.json, got {p.suffix!r}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return data


def _run_spec_from(config: dict, args: argparse.Namespace) -> RunSpec:
    section = config.get("run", {})
    command = args.command or section.get("command") or "python3 {program}"
    if isinstance(command, str):
        command = shlex.split(command)
    kwargs = {
        "command_template": tuple(command),
        "timeout_ms": args.timeout_ms or section.get("timeout_ms", 5000),
        "max_output_bytes": args.max_output_bytes or section.get("max_output_bytes", 1 << 20),
    }
    if section.get("program_filename"):
        kwargs["program_filename"] = section["program_filename"]
    try:
        return RunSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _provider_from_file(path: str) -> ProviderConfig:
    data = _load_config_file(path)
    try:
        return ProviderConfig(
            base_url=data["base_url"],
            model=data["model"],
            api_key_env=data.get("api_key_env", "OPENAI_API_KEY"),
            request_timeout_ms=int(data.get("request_timeout_ms", 60000)),
            max_retries=int(data.get("max_retries", 3)),
            concurrent_request_limit=int(data.get("concurrent_request_limit", 4)),
            use_n_parameter=bool(data.get("use_n_parameter", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"provider config missing key {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("list may not be empty")
    return values


def _print_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    line = "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))
    print(line)
    print("  ".join("-" * w for w in widths))
    for row in rows:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def _write_csv(path: str, headers: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# matrix


def cmd_matrix(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    spec = _run_spec_from(config, args)
    cfg = PipelineConfig(run_spec=spec, workers=args.workers)
    cfg.require_paths(args.tasks, args.codes, args.tests)

    tasks = files.read_tasks(args.tasks)
    groups = files.group_candidates(
        files.read_candidates(args.codes) + files.read_candidates(args.tests)
    )
    out_records = []
    failures = 0
    for task in tasks:
        codes = groups.get((task.id, KIND_CODE), [])
        tests = groups.get((task.id, KIND_TEST), [])
        try:
            matrix = build_matrix(task, codes, tests, cfg.run_spec, workers=cfg.workers)
        except InterpreterMissing:
            raise
        except Exception as exc:
            logger.error("task %s skipped: %s", task.id, exc)
            failures += 1
            continue
        out_records.append(files.matrix_to_record(matrix))
    files.write_jsonl(args.out, out_records)
    logger.info("wrote %d matrices to %s (%d failures)", len(out_records), args.out, failures)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# reward


def cmd_reward(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    reward_section = config.get("reward", {})
    mode = args.mode or reward_section.get("mode", "theoretical")
    if mode not in REWARD_MODES:
        raise ConfigError(f"reward mode must be one of {REWARD_MODES}")
    long_cot = args.long_cot or bool(reward_section.get("long_cot", False))
    cfg = PipelineConfig(reward_mode=mode, long_cot=long_cot)
    cfg.require_paths(args.matrices, args.candidates)
    if long_cot and args.candidates is None:
        raise ConfigError("--long-cot needs --candidates to supply response lengths")

    matrices = files.read_matrices(args.matrices)
    groups = (
        files.group_candidates(files.read_candidates(args.candidates))
        if args.candidates
        else {}
    )
    out_records = []
    failures = 0
    for matrix in matrices:
        invalid_codes = invalid_tests = 0
        lengths = None
        try:
            if groups:
                code_bucket = groups.get((matrix.task_id, KIND_CODE), [])
                test_bucket = groups.get((matrix.task_id, KIND_TEST), [])
                code_map, code_total = files.candidate_maps(code_bucket)
                test_map, test_total = files.candidate_maps(test_bucket)
                if len(code_map) != matrix.n or len(test_map) != matrix.m:
                    raise ShapeError(
                        f"task {matrix.task_id}: candidates disagree with matrix shape"
                    )
                matrix = dataclasses.replace(
                    matrix, code_index_map=code_map, test_index_map=test_map
                )
                invalid_codes = code_total - matrix.n
                invalid_tests = test_total - matrix.m
                lengths = [0] * test_total
                for record in test_bucket:
                    lengths[record.index] = record.length_units
            code_set, test_set = assign_group_rewards(
                matrix,
                invalid_code_count=invalid_codes,
                invalid_test_count=invalid_tests,
                mode=cfg.reward_mode,
                long_cot=cfg.long_cot,
                lengths=lengths,
            )
        except Exception as exc:
            logger.error("task %s skipped: %s", matrix.task_id, exc)
            failures += 1
            continue
        out_records.append(files.rewardset_to_record(code_set))
        out_records.append(files.rewardset_to_record(test_set))
    files.write_jsonl(args.out, out_records)
    logger.info("wrote %d reward sets to %s (%d failures)", len(out_records), args.out, failures)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# bon


def cmd_bon(args: argparse.Namespace) -> int:
    cfg = PipelineConfig(seed=args.seed)
    cfg.require_paths(args.matrices)
    matrices = files.read_matrices(args.matrices)
    if not matrices:
        raise ConfigError(f"no matrices in {args.matrices}")

    summary_rows = []
    failures = 0
    ut_values, code_values, bon_values = [], [], []
    for matrix in matrices:
        if matrix.t_q == 0:
            logger.error("task %s skipped: no ground-truth columns", matrix.task_id)
            failures += 1
            continue
        ut = estimated_test_validity(matrix) if matrix.m else None
        code = code_accuracy(matrix)
        bon = float(select_best(matrix).selected_is_correct) if matrix.m else None
        if ut is not None:
            ut_values.append(ut)
        code_values.append(code)
        if bon is not None:
            bon_values.append(bon)
        summary_rows.append(
            [matrix.task_id, str(matrix.n), str(matrix.m), str(matrix.t_q), _fmt(ut), _fmt(code), _fmt(bon)]
        )
    aggregate = [
        "ALL",
        "",
        "",
        "",
        _fmt(sum(ut_values) / len(ut_values) if ut_values else None),
        _fmt(sum(code_values) / len(code_values) if code_values else None),
        _fmt(sum(bon_values) / len(bon_values) if bon_values else None),
    ]
    summary_rows.append(aggregate)
    headers = ["task_id", "n", "m", "t_q", "ut", "code", "bon"]
    _write_csv(args.out, headers, summary_rows)
    _print_table(headers, summary_rows)

    if args.n_list and args.m_list:
        grid_totals: dict[tuple[int, int], list[float]] = {}
        for matrix in matrices:
            if matrix.t_q == 0 or matrix.m == 0:
                continue
            n_list = [n for n in args.n_list if n <= matrix.n]
            m_list = [m for m in args.m_list if m <= matrix.m]
            if not n_list or not m_list:
                continue
            table = grid_eval(matrix, n_list, m_list, trials=args.trials, seed=cfg.seed)
            for cell, value in table.items():
                grid_totals.setdefault(cell, []).append(value)
        grid_rows = [
            [str(n), str(m), f"{sum(vals) / len(vals):.6f}", str(len(vals))]
            for (n, m), vals in sorted(grid_totals.items())
        ]
        grid_out = args.grid_out or f"{args.out}.grid.csv"
        grid_headers = ["n_codes", "m_tests", "bon_accuracy", "tasks"]
        _write_csv(grid_out, grid_headers, grid_rows)
        print()
        _print_table(grid_headers, grid_rows)

    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _process_from(args: argparse.Namespace) -> GenerativeProcess:
    return GenerativeProcess(
        solution_accuracy=args.solution_accuracy,
        test_accuracy=args.test_accuracy,
        wrong_pass_wrong_test=args.wrong_pass_wrong,
        wrong_pass_correct_test=args.wrong_pass_correct,
    )


def cmd_simulate_theorem(args: argparse.Namespace) -> int:
    process = _process_from(args)
    rows = []
    for m in args.m_list:
        estimate = precision_mc(process, m, trials=args.trials, seed=args.seed)
        rows.append(
            [m, estimate.precision_hat, estimate.std_error, estimate.hoeffding_lower]
        )
    _write_csv(args.out, ["m", "precision_hat", "std_error", "hoeffding_lower"], rows)
    _print_table(
        ["m", "precision_hat", "std_error", "hoeffding_lower"],
        [[str(m), f"{p:.6f}", f"{se:.6f}", f"{hl:.6f}"] for m, p, se, hl in rows],
    )
    return EXIT_OK


def cmd_simulate_estimators(args: argparse.Namespace) -> int:
    process = _process_from(args)
    headers = [
        "n",
        "m",
        "trials",
        "used_trials",
        "skipped_trials",
        "margin_true",
        "margin_hat_mean",
        "mean_abs_error",
        "ratio_identity_max_err",
    ]
    rows = []
    for n in args.n_list:
        report = estimator_check(process, n, args.m, trials=args.trials, seed=args.seed)
        rows.append(
            [
                report.n,
                report.m,
                report.trials,
                report.used_trials,
                report.skipped_trials,
                report.margin_true,
                report.margin_hat_mean,
                report.mean_abs_error,
                report.ratio_identity_max_err,
            ]
        )
    _write_csv(args.out, headers, rows)
    _print_table(headers, [[str(v) for v in row] for row in rows])
    return EXIT_OK


def cmd_simulate_coevolve(args: argparse.Namespace) -> int:
    process = _process_from(args)
    trace = coevolve_sim(
        process,
        steps=args.steps,
        n=args.n,
        m=args.m,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    headers = ["step", "test_accuracy", "solution_accuracy", "mean_test_reward", "mean_code_reward"]
    rows = [
        [r.step, r.test_accuracy, r.solution_accuracy, r.mean_test_reward, r.mean_code_reward]
        for r in trace.records
    ]
    _write_csv(args.out, headers, rows)
    logger.info("wrote %d trace steps to %s", len(rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = PipelineConfig(
        provider=_provider_from_file(args.provider),
        sampling=(
            SamplingConfig.for_long_cot(num_samples=args.num_samples)
            if args.long_cot and args.temperature is None
            else SamplingConfig(
                temperature=args.temperature if args.temperature is not None else 1.0,
                top_p=args.top_p,
                max_tokens=args.max_tokens,
                num_samples=args.num_samples,
            )
        ),
        seed=args.seed,
    )
    cfg.require_paths(args.tasks)
    tasks = files.read_tasks(args.tasks)

    done: dict[str, list] = {}
    if args.resume and Path(args.out).exists():
        for record in files.read_candidates(args.out):
            if record.kind == args.kind:
                done.setdefault(record.task_id, []).append(record)

    all_records = []
    failures = 0
    for task in tasks:
        if task.id in done:
            all_records.extend(sorted(done[task.id], key=lambda r: r.index))
            continue
        try:
            records = generate(task, args.kind, cfg.sampling, cfg.provider, seed=cfg.seed or 0)
        except AuthError:
            raise
        except GatewayError as exc:
            logger.error("task %s skipped: %s", task.id, exc)
            failures += 1
            continue
        all_records.extend(records)
    files.write_candidates(args.out, all_records)
    logger.info(
        "wrote %d candidates to %s (%d task failures)", len(all_records), args.out, failures
    )
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coevo",
        description="Execution-matrix rewards and best-of-N selection pipelines",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("matrix", help="run candidates against tests and write matrices")
    p.add_argument("--tasks", required=True)
    p.add_argument("--codes", required=True)
    p.add_argument("--tests", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--command", help='interpreter command, e.g. "python3 {program}"')
    p.add_argument("--timeout-ms", type=int, default=None)
    p.add_argument("--max-output-bytes", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("reward", help="score matrices into reward/advantage files")
    p.add_argument("--matrices", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=REWARD_MODES, default=None)
    p.add_argument("--long-cot", action="store_true")
    p.add_argument("--candidates", help="candidate file for invalid slots and lengths")
    p.add_argument("--config")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("bon", help="selection report and scaling grid")
    p.add_argument("--matrices", required=True)
    p.add_argument("--out", required=True, help="summary CSV path")
    p.add_argument("--grid-out", help="grid CSV path (default: <out>.grid.csv)")
    p.add_argument("--n-list", type=_int_list, default=None)
    p.add_argument("--m-list", type=_int_list, default=None)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_bon)

    p = sub.add_parser("simulate", help="Monte Carlo lab")
    sim = p.add_subparsers(dest="sim_cmd", required=True)

    def add_process_args(sp, with_solution: bool):
        if with_solution:
            sp.add_argument("--solution-accuracy", type=float, required=True)
        else:
            sp.add_argument("--solution-accuracy", type=float, default=0.5)
        sp.add_argument("--test-accuracy", type=float, required=True)
        sp.add_argument("--wrong-pass-correct", type=float, required=True)
        sp.add_argument("--wrong-pass-wrong", type=float, required=True)
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--out", required=True)

    sp = sim.add_parser("theorem1", help="ranking precision vs the concentration bound")
    add_process_args(sp, with_solution=False)
    sp.add_argument("--m-list", type=_int_list, default=[4, 16, 64, 256])
    sp.add_argument("--trials", type=int, default=20000)
    sp.set_defaults(func=cmd_simulate_theorem)

    sp = sim.add_parser("estimators", help="plug-in margin estimator accuracy")
    add_process_args(sp, with_solution=True)
    sp.add_argument("--n-list", type=_int_list, default=[8, 32, 128, 512])
    sp.add_argument("--m", type=int, default=16)
    sp.add_argument("--trials", type=int, default=100)
    sp.set_defaults(func=cmd_simulate_estimators)

    sp = sim.add_parser("coevolve", help="toy co-evolution trace")
    add_process_args(sp, with_solution=True)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--m", type=int, default=16)
    sp.add_argument("--learning-rate", type=float, default=0.05)
    sp.set_defaults(func=cmd_simulate_coevolve)

    p = sub.add_parser("generate", help="fetch candidates from a completion endpoint")
    p.add_argument("--tasks", required=True)
    p.add_argument("--kind", choices=(KIND_CODE, KIND_TEST), required=True)
    p.add_argument("--provider", required=True, help="provider config (.yaml/.json)")
    p.add_argument("--out", required=True)
    p.add_argument("--num-samples", type=int, default=16)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--top-p", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=None)
    p.add_argument("--long-cot", action="store_true", help="long-CoT sampling defaults")
    p.add_argument("--resume", action="store_true", help="keep finished tasks from --out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, InterpreterMissing, AuthError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
