"""
vmc_cli.py — 명령행 진입점
===========================
    python vmc_cli.py gen --kind uos --n 15 --k 3 --r 3 --points 100 --out X.csv
    python vmc_cli.py rank --input X.csv --degree 2
    python vmc_cli.py bound --n 15 --s 300 --degree 2 --k 3 --r 3
    python vmc_cli.py complete --input X_obs.csv --degree 2 --out X_hat.csv --trace trace.jsonl
    python vmc_cli.py phase-uos --config uos.env
    python vmc_cli.py phase-parametric --config parametric.env
    python vmc_cli.py bench --input X.csv --rates 0.2,0.4 --methods vmc_d2,lrmc
    python vmc_cli.py replay --manifest results/phase_uos.json

종료 코드: 0 성공, 2 사용법/인자 오류, 3 데이터 오류, 4 수치 오류.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv

from errors import DataFormatError, DomainError, VarietyError, exit_code_for
from experiments import (
    ExperimentConfig,
    load_experiment_config,
    replay,
    run_bench,
    run_phase_parametric,
    run_phase_uos,
)
from lifting import DEFAULT_REL_TOL, feature_dimension, lifted_rank
from matrix_io import (
    load_json,
    load_mask_csv,
    load_matrix_csv,
    save_grid,
    save_mask_csv,
    save_matrix_csv,
    save_report,
)
from sampling import RANK_SOURCES, min_samples_per_column, rate_lower_bound, uos_rank_bound
from solver import IrlsConfig, vmc_complete
from synth import (
    CONIC_PRESETS,
    ConicSpec,
    ObservedMatrix,
    apply_mask,
    conic_preset,
    gen_conic,
    gen_parametric,
    gen_uos,
    sample_mask,
)

logger = logging.getLogger("vmc_cli")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _emit(payload: dict) -> None:
    print(json.dumps(payload, ensure_ascii=False))


def _float_list(raw: str) -> List[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {raw!r}") from None


def _str_list(raw: str) -> List[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


# ─────────────────────────────────────────────
# 서브커맨드
# ─────────────────────────────────────────────

def cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "uos":
        data = gen_uos(args.n, args.k, args.r, args.points, affine=args.affine,
                       seed=args.seed, orthogonal=args.orthogonal)
    elif args.kind == "parametric":
        data = gen_parametric(args.n, args.latent_dim, args.map_degree, args.s,
                              seed=args.seed, components=args.components)
    else:
        if args.coefficients is not None:
            if len(args.coefficients) != 6:
                raise DomainError("--coefficients needs six values c0..c5")
            spec = ConicSpec(coefficients=tuple(args.coefficients), s=args.s)
        else:
            spec = conic_preset(args.preset, args.s)
        data = gen_conic(spec, seed=args.seed)

    save_matrix_csv(args.out, data.X)
    n, s = data.X.shape
    out = {"out": args.out, "n": n, "s": s, "seed": args.seed}
    if args.m is not None:
        mask = sample_mask(n, s, args.m, seed=args.mask_seed)
        if args.mask_out:
            save_mask_csv(args.mask_out, mask)
            out["mask"] = args.mask_out
        if args.observed_out:
            save_matrix_csv(args.observed_out, apply_mask(data.X, mask))
            out["observed"] = args.observed_out
    _emit(out)
    return 0


def _fully_observed(path: str) -> np.ndarray:
    observed = load_matrix_csv(path)
    if observed.n_missing:
        raise DataFormatError(f"{path}: {observed.n_missing} missing entries, a complete matrix is required")
    return observed.data


def cmd_rank(args: argparse.Namespace) -> int:
    X = _fully_observed(args.input)
    report = lifted_rank(X, args.degree, args.rel_tol)
    _emit({
        "rank": report.numerical_rank,
        "N": report.N,
        "s": report.s,
        "degree": args.degree,
        "rel_tol": report.rel_tol,
        "lambda_max": report.lambda_max,
    })
    return 0


def cmd_bound(args: argparse.Namespace) -> int:
    if args.rank is not None:
        R, source = args.rank, args.rank_source
        R_uncapped = R
    elif args.k is not None and args.r is not None:
        # 부분공간 합집합 상한은 lift 행렬 크기 N×s 를 넘을 수 없다
        R_uncapped = uos_rank_bound(args.k, args.r, args.degree)
        R = min(R_uncapped, feature_dimension(args.n, args.degree), args.s)
        source = "analytic"
    else:
        raise DomainError("bound needs --rank or both --k and --r")
    bound = min_samples_per_column(args.n, args.s, args.degree, R, rank_source=source)
    _emit({
        "n": bound.n, "s": bound.s, "degree": bound.d, "R": bound.R, "N": bound.N,
        "m0": bound.m0, "M0": bound.M0, "rho0": bound.rho0, "rank_source": bound.rank_source,
        "R_uncapped": R_uncapped, "capped": R < R_uncapped,
        "rate_lower_bound": rate_lower_bound(args.n, args.s, args.degree, R),
    })
    return 0


def cmd_complete(args: argparse.Namespace) -> int:
    observed = load_matrix_csv(args.input)
    if args.mask:
        n, s = observed.shape
        mask = load_mask_csv(args.mask, n, s)
        inside = mask.to_bool()
        if np.any(inside & ~observed.observed):
            raise DataFormatError(f"{args.mask}: mask reveals entries missing from {args.input}")
        observed = ObservedMatrix(data=observed.data, observed=inside)

    config = IrlsConfig(d=args.degree, p=args.p, max_iter=args.max_iter, tol=args.tol,
                        stop_window=args.stop_window)
    trace_file = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        callback = None
        if trace_file is not None:
            def callback(record):
                trace_file.write(json.dumps(record.to_dict()) + "\n")
        result = vmc_complete(observed, config, on_iteration=callback)
    finally:
        if trace_file is not None:
            trace_file.close()

    save_matrix_csv(args.out, result.X_hat)
    _emit({
        "out": args.out,
        "iterations": result.iterations,
        "converged": result.converged,
        "final_gamma": result.final_gamma,
    })
    return 0


def _experiment_config(args: argparse.Namespace, kind: str) -> ExperimentConfig:
    config = load_experiment_config(args.config)
    if config.kind != kind:
        raise DomainError(f"{args.config} is a {config.kind} config, expected {kind}")
    if args.out_dir:
        config = ExperimentConfig(**{**config.to_dict(), "output_dir": args.out_dir})
    return config


def cmd_phase_uos(args: argparse.Namespace) -> int:
    config = _experiment_config(args, "phase_uos")
    grid = run_phase_uos(config, num_threads=args.threads)
    paths = save_grid(grid, config.output_prefix())
    _emit({"cells": len(grid.cells), **paths})
    return 0


def cmd_phase_parametric(args: argparse.Namespace) -> int:
    config = _experiment_config(args, "phase_parametric")
    grid = run_phase_parametric(config, num_threads=args.threads)
    paths = save_grid(grid, config.output_prefix())
    _emit({"cells": len(grid.cells), **paths})
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.config:
        config = load_experiment_config(args.config)
    else:
        config = ExperimentConfig.desk_scale("bench")
    overrides = {"input": args.input}
    if args.rates is not None:
        overrides["missing_rates"] = args.rates
    if args.methods is not None:
        overrides["methods"] = args.methods
    if args.out_dir:
        overrides["output_dir"] = args.out_dir
    config = ExperimentConfig(**{**config.to_dict(), **overrides})

    report = run_bench(args.input, config=config, num_threads=args.threads)
    paths = save_report(report, config.output_prefix())
    _emit({"rows": len(report.rows), **paths})
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    saved = load_json(args.manifest)
    if "manifest" not in saved:
        raise DataFormatError(f"{args.manifest}: no 'manifest' section")
    result = replay(saved["manifest"])
    prefix = args.out
    if hasattr(result, "cells"):
        paths = save_grid(result, prefix)
    else:
        paths = save_report(result, prefix)
    _emit(paths)
    return 0


# ─────────────────────────────────────────────
# 파서
# ─────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmc", description="variety-based matrix completion")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG 로그 출력")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="합성 데이터셋 / 마스크 생성")
    p.add_argument("--kind", choices=("uos", "parametric", "conic"), required=True)
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--points", type=int, default=100, help="부분공간당 점 개수")
    p.add_argument("--affine", action="store_true")
    p.add_argument("--orthogonal", action="store_true")
    p.add_argument("--latent-dim", type=int, default=1)
    p.add_argument("--map-degree", type=int, default=2)
    p.add_argument("--s", type=int, default=300)
    p.add_argument("--components", type=int, default=1)
    p.add_argument("--preset", choices=sorted(CONIC_PRESETS), default="circle")
    p.add_argument("--coefficients", type=_float_list, default=None, help="c0,...,c5")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=None, help="열당 관측 수 (마스크 생성)")
    p.add_argument("--mask-seed", type=int, default=1)
    p.add_argument("--mask-out", default=None)
    p.add_argument("--observed-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("rank", help="lift 된 행렬의 numerical rank")
    p.add_argument("--input", required=True)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bound", help="최소 열당 표본 수 m0")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--rank-source", choices=RANK_SOURCES, default="analytic")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("complete", help="관측 행렬 완성")
    p.add_argument("--input", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--stop-window", type=int, default=100)
    p.add_argument("--trace", default=None, help="반복 기록 JSON lines 파일")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_complete)

    for name, func in (("phase-uos", cmd_phase_uos), ("phase-parametric", cmd_phase_parametric)):
        p = sub.add_parser(name, help="phase transition 실험")
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="결측률별 완성 오차 벤치마크")
    p.add_argument("--input", required=True)
    p.add_argument("--rates", type=_float_list, default=None)
    p.add_argument("--methods", type=_str_list, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="저장된 결과의 manifest 로 재실행")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="출력 경로 prefix")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return args.func(args)
    except VarietyError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
