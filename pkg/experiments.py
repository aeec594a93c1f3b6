"""
experiments.py — phase transition / benchmark 실험 드라이버
============================================================
  - run_phase_uos        : 부분공간 합집합 데이터, (k, m) 격자
  - run_phase_parametric : 다항식 곡선/곡면 데이터, (R̂, m) 격자
  - run_bench            : CSV 행렬 하나를 결측률별로 지우고 방법별 완성 오차 측정

trial 은 ThreadPoolExecutor 로 병렬 실행되지만 seed 는 (root seed, 인덱스) 에서
결정적으로 파생되고 결과는 (cell, trial) 키로 모은 뒤 정렬해서 집계하므로
완료 순서와 무관하다. manifest 에 설정 전체가 들어 있어 그대로 재실행 가능.

환경 변수:
  VMC_NUM_THREADS : 워커 수 (기본 1)
  VMC_OUTPUT_DIR  : 결과 저장 디렉터리 (기본 results)
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy
from dotenv import dotenv_values

from errors import ConfigError, DataFormatError, DomainError, NumericalError
from lifting import DEFAULT_REL_TOL, feature_dimension, lifted_rank
from matrix_io import file_sha256, load_matrix_csv
from sampling import RANK_SOURCES, min_samples_per_column, rate_lower_bound, uos_rank_bound
from solver import (
    DEFAULT_SUCCESS_THRESHOLD,
    METHODS,
    IrlsConfig,
    column_errors,
    completion_error,
    get_method,
    solve_with_method,
)
from synth import ObservationMask, apply_mask, derive_seed, gen_parametric, gen_uos, sample_mask

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = "0.1.0"
EXPERIMENT_KINDS = ("phase_uos", "phase_parametric", "bench")
QUANTILES = (1.0, 0.99, 0.90)
DESK_MAX_ITER = 5000

_DEFAULT_METHODS = {
    "phase_uos": ("vmc_d2", "vmc_d3", "lrmc", "lrmc_ncvx"),
    "phase_parametric": ("vmc_d2", "vmc_d3"),
    "bench": ("vmc_d2", "vmc_d3", "lrmc", "lrmc_ncvx"),
}
_DEFAULT_N = {"phase_uos": 15, "phase_parametric": 20, "bench": None}

# seed 네임스페이스 (derive_seed 첫 인덱스)
_SEED_DATASET = 0
_SEED_MASK = 1
_SEED_BENCH = 2


# ─────────────────────────────────────────────
# 환경 설정
# ─────────────────────────────────────────────

def get_num_threads() -> int:
    raw = os.environ.get("VMC_NUM_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"VMC_NUM_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"VMC_NUM_THREADS must be >= 1, got {value}")
    return value


def get_output_dir() -> str:
    return os.environ.get("VMC_OUTPUT_DIR", "results")


def quantile_label(q: float) -> str:
    return f"success_{int(round(q * 100))}"


# ─────────────────────────────────────────────
# 실험 설정
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class ExperimentConfig:
    """실험 하나의 전체 설정. 빈 값은 __post_init__ 에서 kind 별 기본값으로 채움."""
    kind: str
    name: str = ""
    m_values: Tuple[int, ...] = ()
    k_values: Tuple[int, ...] = ()
    n: Optional[int] = None
    r: int = 3
    points_per_subspace: int = 100
    affine: bool = False
    latent_dims: Tuple[int, ...] = (1, 2, 3)
    map_degrees: Tuple[int, ...] = (1, 2)
    s: Optional[int] = None
    components: int = 1
    trials: int = 10
    methods: Tuple[str, ...] = ()
    rank_source: str = "analytic"
    rel_tol: float = DEFAULT_REL_TOL
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD
    max_iter: int = 5000
    tol: float = 1e-6
    stop_window: int = 100
    eta: float = 1.01
    gamma0_factor: float = 0.1
    root_seed: int = 0
    output_dir: str = ""
    input: str = ""
    missing_rates: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)
        if not self.methods:
            object.__setattr__(self, "methods", _DEFAULT_METHODS[self.kind])
        if self.n is None and _DEFAULT_N[self.kind] is not None:
            object.__setattr__(self, "n", _DEFAULT_N[self.kind])
        if self.s is None and self.kind == "phase_parametric":
            object.__setattr__(self, "s", 300)
        for name in ("m_values", "k_values", "latent_dims", "map_degrees", "methods", "missing_rates"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self._validate()

    def _validate(self) -> None:
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.rank_source not in RANK_SOURCES:
            raise ConfigError(f"rank_source must be one of {RANK_SOURCES}")
        if not self.success_threshold > 0.0:
            raise ConfigError("success_threshold must be positive")

        if self.kind in ("phase_uos", "phase_parametric"):
            if not self.m_values:
                raise ConfigError("m_values must not be empty")
            bad = [m for m in self.m_values if not 1 <= m <= self.n]
            if bad:
                raise ConfigError(f"m_values must lie in [1, n={self.n}], got {bad}")
        if self.kind == "phase_uos":
            if not self.k_values or min(self.k_values) < 1:
                raise ConfigError("k_values must be a non-empty list of integers >= 1")
            if not 1 <= self.r < self.n:
                raise ConfigError(f"need 1 <= r < n, got r={self.r}, n={self.n}")
            if self.points_per_subspace < 1:
                raise ConfigError("points_per_subspace must be >= 1")
        elif self.kind == "phase_parametric":
            if not self.latent_dims or not self.map_degrees:
                raise ConfigError("latent_dims and map_degrees must not be empty")
            if any(l not in (1, 2, 3) or l >= self.n for l in self.latent_dims):
                raise ConfigError(f"latent_dims must be in {{1,2,3}} and < n, got {self.latent_dims}")
            if min(self.map_degrees) < 1:
                raise ConfigError("map_degrees must be >= 1")
        elif self.kind == "bench":
            if not self.missing_rates:
                raise ConfigError("missing_rates must not be empty")
            bad = [x for x in self.missing_rates if not 0.0 <= x < 1.0]
            if bad:
                raise ConfigError(f"missing_rates must lie in [0, 1), got {bad}")

        # IrlsConfig 검증 재사용
        try:
            self.solver_config()
        except DomainError as e:
            raise ConfigError(str(e)) from e

    def solver_config(self) -> IrlsConfig:
        """방법별 d, p 는 METHODS 에서 채워짐."""
        return IrlsConfig(
            max_iter=self.max_iter, tol=self.tol, stop_window=self.stop_window,
            eta=self.eta, gamma0_factor=self.gamma0_factor,
        )

    def resolved_output_dir(self) -> str:
        return self.output_dir or get_output_dir()

    def output_prefix(self) -> str:
        return os.path.join(self.resolved_output_dir(), self.name)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @classmethod
    def desk_scale(cls, kind: str, **overrides) -> "ExperimentConfig":
        """노트북 규모 축소 설정 (k ∈ {2,3,4,6}, 5 trials).

        max_iter = DESK_MAX_ITER: η = 1.01 에서 γ 가 floor (1e-14·γ0) 에 닿는 ≈3240 번보다 커야 함.
        """
        presets: Dict[str, Dict[str, Any]] = {
            "phase_uos": dict(k_values=(2, 3, 4, 6), m_values=tuple(range(1, 16))),
            "phase_parametric": dict(m_values=tuple(range(1, 21))),
            "bench": dict(missing_rates=(0.2, 0.4, 0.6)),
        }
        if kind not in presets:
            raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
        params = {"trials": 5, "max_iter": DESK_MAX_ITER, **presets[kind], **overrides}
        return cls(kind=kind, **params)


# ─────────────────────────────────────────────
# 설정 파일 (KEY=value)
# ─────────────────────────────────────────────

def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_list(item: Callable[[str], Any]) -> Callable[[str], Tuple[Any, ...]]:
    def parse(raw: str) -> Tuple[Any, ...]:
        return tuple(item(tok.strip()) for tok in raw.split(",") if tok.strip())
    return parse


def _optional_int(raw: str) -> Optional[int]:
    return None if raw.strip().lower() in ("", "none") else int(raw)


_PARSERS: Dict[str, Callable[[str], Any]] = {
    "kind": str.strip,
    "name": str.strip,
    "m_values": _parse_list(int),
    "k_values": _parse_list(int),
    "n": _optional_int,
    "r": int,
    "points_per_subspace": int,
    "affine": _parse_bool,
    "latent_dims": _parse_list(int),
    "map_degrees": _parse_list(int),
    "s": _optional_int,
    "components": int,
    "trials": int,
    "methods": _parse_list(str),
    "rank_source": str.strip,
    "rel_tol": float,
    "success_threshold": float,
    "max_iter": int,
    "tol": float,
    "stop_window": int,
    "eta": float,
    "gamma0_factor": float,
    "root_seed": int,
    "output_dir": str.strip,
    "input": str.strip,
    "missing_rates": _parse_list(float),
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config_values(values: Dict[str, Optional[str]]) -> ExperimentConfig:
    parsed: Dict[str, Any] = {}
    for raw_key, raw_value in values.items():
        key = raw_key.strip().lower()
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {raw_key!r}")
        if raw_value is None:
            raise ConfigError(f"config key {raw_key!r} has no value")
        try:
            parsed[key] = _PARSERS[key](raw_value)
        except ValueError as e:
            raise ConfigError(f"cannot parse {raw_key}={raw_value!r}: {e}") from None
    if "kind" not in parsed:
        raise ConfigError("config must set 'kind'")
    return ExperimentConfig(**parsed)


def load_experiment_config(path: str) -> ExperimentConfig:
    """dotenv 형식 (KEY=value, # 주석) 설정 파일 로드."""
    if not os.path.isfile(path):
        raise DataFormatError(f"config file not found: {path}")
    config = parse_config_values(dotenv_values(path))
    logger.info("실험 설정 로드: %s (kind=%s)", path, config.kind)
    return config


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_from_manifest(manifest: Dict[str, Any]) -> ExperimentConfig:
    """manifest['config'] 로 ExperimentConfig 복원. 해시가 다르면 ConfigError."""
    try:
        raw = dict(manifest["config"])
    except (KeyError, TypeError):
        raise ConfigError("manifest has no 'config' section") from None
    unknown = set(raw) - set(_PARSERS)
    if unknown:
        raise ConfigError(f"unknown config keys in manifest: {sorted(unknown)}")
    for key, value in raw.items():
        if isinstance(value, list):
            raw[key] = tuple(value)
    config = ExperimentConfig(**raw)
    expected = manifest.get("config_hash")
    if expected is not None and expected != config_hash(config):
        raise ConfigError("manifest config_hash does not match its config")
    return config


def solver_calibration(config: ExperimentConfig) -> Dict[str, Any]:
    """manifest 에 남기는 solver 예산과 방법별 (d, p)."""
    base = config.solver_config()
    return {
        "eta": base.eta,
        "max_iter": base.max_iter,
        "tol": base.tol,
        "stop_window": base.stop_window,
        "gamma0_factor": base.gamma0_factor,
        "gamma_floor_rel": base.gamma_floor_rel,
        "iterations_to_floor": math.ceil(math.log(1.0 / base.gamma_floor_rel) / math.log(base.eta)),
        "methods": {name: {"d": METHODS[name].d, "p": METHODS[name].p} for name in config.methods},
    }


def build_manifest(config: ExperimentConfig, num_threads: int, seeds: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "artifact_version": ARTIFACT_VERSION,
        "root_seed": config.root_seed,
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "num_threads": num_threads,
        "libraries": {
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
        "solver": solver_calibration(config),
        "seeds": seeds,
    }


# ─────────────────────────────────────────────
# 결과 객체
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class TrialRecord:
    """(방법, 축 값, m, trial) 하나의 결과."""
    method: str
    axis: int
    m: int
    trial: int
    data_seed: int
    mask_seed: int
    rank: int
    columns: int
    recovered: int
    completion_error: Optional[float]
    iterations: int
    converged: bool
    failed: bool = False
    message: str = ""

    @property
    def column_success_rate(self) -> float:
        return self.recovered / self.columns

    def succeeds_at(self, quantile: float) -> bool:
        # 부동소수 비교 대신 열 개수로 판정
        return self.recovered >= math.ceil(quantile * self.columns - 1e-9)


@dataclass(frozen=True)
class PhaseCell:
    method: str
    axis: int
    m: int
    trials: int
    success: Dict[float, float]
    mean_column_success: float
    failures: int
    R: int
    rank_source: str
    m0: int
    rho0: float
    rate_lower_bound: float
    mask_seeds: Tuple[int, ...]

    def to_record(self, axis_name: str) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "method": self.method,
            axis_name: self.axis,
            "m": self.m,
            "trials": self.trials,
        }
        for q in QUANTILES:
            row[quantile_label(q)] = self.success[q]
        row.update(
            mean_column_success=self.mean_column_success,
            failures=self.failures,
            R=self.R,
            rank_source=self.rank_source,
            m0=self.m0,
            rho0=self.rho0,
            rate_lower_bound=self.rate_lower_bound,
        )
        return row


@dataclass
class PhaseGrid:
    kind: str
    axis_name: str
    n: int
    s: int
    methods: Tuple[str, ...]
    m_values: Tuple[int, ...]
    cells: List[PhaseCell]
    trials: List[TrialRecord]
    manifest: Dict[str, Any] = field(default_factory=dict)

    @property
    def axis_values(self) -> Tuple[int, ...]:
        return tuple(sorted({c.axis for c in self.cells}))

    def cell(self, method: str, axis: int, m: int) -> PhaseCell:
        for c in self.cells:
            if (c.method, c.axis, c.m) == (method, axis, m):
                return c
        raise KeyError((method, axis, m))

    def to_records(self) -> List[Dict[str, Any]]:
        return [c.to_record(self.axis_name) for c in self.cells]

    def success_table(self, method: str, quantile: float = 1.0) -> pd.DataFrame:
        """행 = 축 값 (k 또는 R), 열 = m 인 성공 비율 표."""
        frame = pd.DataFrame.from_records(self.to_records())
        frame = frame[frame["method"] == method]
        return frame.pivot_table(index=self.axis_name, columns="m",
                                 values=quantile_label(quantile), aggfunc="mean")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "axis_name": self.axis_name,
            "n": self.n,
            "s": self.s,
            "methods": list(self.methods),
            "m_values": list(self.m_values),
            "axis_values": list(self.axis_values),
            "quantiles": list(QUANTILES),
            "cells": self.to_records(),
            "trials": [asdict(t) for t in self.trials],
            "manifest": self.manifest,
        }


@dataclass(frozen=True)
class BenchRow:
    method: str
    missing_rate: float
    m: int
    mask_seed: int
    completion_error: Optional[float]
    seconds: float
    iterations: int
    converged: bool
    failed: bool = False
    message: str = ""


@dataclass
class BenchReport:
    input_path: str
    input_sha256: str
    n: int
    s: int
    rows: List[BenchRow]
    manifest: Dict[str, Any] = field(default_factory=dict)

    def error(self, method: str, missing_rate: float) -> Optional[float]:
        for row in self.rows:
            if row.method == method and row.missing_rate == missing_rate:
                return row.completion_error
        raise KeyError((method, missing_rate))

    def to_records(self) -> List[Dict[str, Any]]:
        return [asdict(r) for r in self.rows]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input": {"path": self.input_path, "sha256": self.input_sha256,
                      "n": self.n, "s": self.s},
            "rows": self.to_records(),
            "manifest": self.manifest,
        }


# ─────────────────────────────────────────────
# 실행 도우미
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class _Unit:
    key: Tuple[int, ...]
    axis: int
    m: int
    trial: int
    data_seed: int
    mask_seed: int


def _run_units(units: Sequence[_Unit], work: Callable[[_Unit], List[Any]], workers: int) -> List[Any]:
    """단위 작업 병렬 실행. 결과는 unit.key 순서로 평탄화 (완료 순서 무관)."""
    results: Dict[Tuple[int, ...], List[Any]] = {}
    total = len(units)
    if workers <= 1:
        for done, unit in enumerate(units, start=1):
            results[unit.key] = work(unit)
            logger.debug("진행 (%d/%d) key=%s", done, total, unit.key)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_unit = {executor.submit(work, unit): unit for unit in units}
            for done, future in enumerate(concurrent.futures.as_completed(future_to_unit), start=1):
                unit = future_to_unit[future]
                results[unit.key] = future.result()
                logger.debug("진행 (%d/%d) key=%s", done, total, unit.key)
    return [rec for key in sorted(results) for rec in results[key]]


def _solve_trial(
    method: str,
    X0: np.ndarray,
    mask: ObservationMask,
    base: IrlsConfig,
    threshold: float,
    unit: _Unit,
    axis: int,
    rank: int,
) -> TrialRecord:
    observed = apply_mask(X0, mask)
    try:
        result = solve_with_method(method, observed, base)
    except NumericalError as e:
        logger.warning("solve 실패 method=%s axis=%s m=%d trial=%d: %s",
                       method, axis, unit.m, unit.trial, e)
        return TrialRecord(
            method=method, axis=axis, m=unit.m, trial=unit.trial,
            data_seed=unit.data_seed, mask_seed=unit.mask_seed, rank=rank,
            columns=X0.shape[1], recovered=0, completion_error=None,
            iterations=getattr(e, "iteration", 0), converged=False,
            failed=True, message=str(e),
        )
    errs = column_errors(result.X_hat, X0)
    return TrialRecord(
        method=method, axis=axis, m=unit.m, trial=unit.trial,
        data_seed=unit.data_seed, mask_seed=unit.mask_seed, rank=rank,
        columns=X0.shape[1], recovered=int(np.count_nonzero(errs < threshold)),
        completion_error=completion_error(result.X_hat, X0),
        iterations=result.iterations, converged=result.converged,
    )


def _aggregate(records: List[TrialRecord], n: int, s: int, rank_source: str) -> List[PhaseCell]:
    groups: Dict[Tuple[str, int, int], List[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.axis, rec.m), []).append(rec)

    cells = []
    order = {name: i for i, name in enumerate(METHODS)}
    for (method, axis, m) in sorted(groups, key=lambda k: (order[k[0]], k[1], k[2])):
        recs = sorted(groups[(method, axis, m)], key=lambda r: (r.trial, r.data_seed))
        d = get_method(method).d
        R = min(max(r.rank for r in recs), feature_dimension(n, d), s)
        bound = min_samples_per_column(n, s, d, R, rank_source=rank_source)
        cell = PhaseCell(
            method=method, axis=axis, m=m, trials=len(recs),
            success={q: sum(r.succeeds_at(q) for r in recs) / len(recs) for q in QUANTILES},
            mean_column_success=float(np.mean([r.column_success_rate for r in recs])),
            failures=sum(r.failed for r in recs),
            R=R, rank_source=rank_source, m0=bound.m0, rho0=bound.rho0,
            rate_lower_bound=rate_lower_bound(n, s, d, R),
            mask_seeds=tuple(r.mask_seed for r in recs),
        )
        logger.info("cell method=%s axis=%d m=%d: success(100%%)=%.2f m0=%d",
                    method, axis, m, cell.success[1.0], cell.m0)
        cells.append(cell)
    return cells


def _require_kind(config: ExperimentConfig, kind: str) -> None:
    if config.kind != kind:
        raise ConfigError(f"expected a {kind} config, got kind={config.kind!r}")


# ─────────────────────────────────────────────
# phase transition: 부분공간 합집합
# ─────────────────────────────────────────────

def run_phase_uos(config: ExperimentConfig, num_threads: Optional[int] = None) -> PhaseGrid:
    """
    (k, m, trial) 마다 UoS 데이터 생성 → 마스크 → 방법별 완성 → 열별 성공 판정.
    데이터와 마스크 모두 (k, m, trial) 셀마다 따로 뽑음 (seed 는 셀 인덱스에서 파생).
    예측 m0 는 R = min(k·C(r+d, d), N, s) (empirical 이면 측정한 R̂ 의 최대값).
    """
    _require_kind(config, "phase_uos")
    workers = num_threads or get_num_threads()
    base = config.solver_config()
    n, r, trials = config.n, config.r, config.trials
    n_m = len(config.m_values)

    units = []
    for ki, k in enumerate(config.k_values):
        for mi, m in enumerate(config.m_values):
            for t in range(trials):
                flat = (ki * n_m + mi) * trials + t
                units.append(_Unit(key=(ki, mi, t), axis=k, m=m, trial=t,
                                   data_seed=derive_seed(config.root_seed, _SEED_DATASET, flat),
                                   mask_seed=derive_seed(config.root_seed, _SEED_MASK, flat)))

    def work(unit: _Unit) -> List[TrialRecord]:
        k = unit.axis
        data = gen_uos(n, k, r, config.points_per_subspace, affine=config.affine,
                       seed=unit.data_seed)
        s = data.X.shape[1]
        mask = sample_mask(n, s, unit.m, seed=unit.mask_seed)
        out = []
        for method in config.methods:
            d = get_method(method).d
            if config.rank_source == "empirical":
                rank = lifted_rank(data.X, d, config.rel_tol).numerical_rank
            else:
                rank = min(uos_rank_bound(k, r, d), feature_dimension(n, d), s)
            out.append(_solve_trial(method, data.X, mask, base, config.success_threshold,
                                    unit, k, rank))
        return out

    logger.info("phase_uos 시작: k=%s m=%s trials=%d methods=%s workers=%d",
                config.k_values, config.m_values, trials, config.methods, workers)
    records = _run_units(units, work, workers)

    # 셀 집계는 k 마다 s 가 다르므로 k 별로
    cells: List[PhaseCell] = []
    for k in config.k_values:
        s_k = k * config.points_per_subspace
        cells.extend(_aggregate([rec for rec in records if rec.axis == k], n, s_k,
                                config.rank_source))

    seeds = {
        "datasets": {f"k={u.axis},m={u.m},trial={u.trial}": u.data_seed for u in units},
        "masks": {f"k={u.axis},m={u.m},trial={u.trial}": u.mask_seed for u in units},
    }
    return PhaseGrid(
        kind="phase_uos", axis_name="k", n=n,
        s=max(config.k_values) * config.points_per_subspace,
        methods=config.methods, m_values=config.m_values,
        cells=cells, trials=records,
        manifest=build_manifest(config, workers, seeds),
    )


# ─────────────────────────────────────────────
# phase transition: 다항식 곡선 / 곡면
# ─────────────────────────────────────────────

def run_phase_parametric(config: ExperimentConfig, num_threads: Optional[int] = None) -> PhaseGrid:
    """
    (ℓ, map_degree, m) 셀마다 trials 개의 데이터셋을 만들고 방법의 차수 d 에서
    R̂ = lifted_rank 를 측정해 R̂ 별로 묶는다. 예측 m0 는 min_samples_per_column(n, s, d, R̂).
    """
    _require_kind(config, "phase_parametric")
    workers = num_threads or get_num_threads()
    base = config.solver_config()
    n, s, trials = config.n, config.s, config.trials
    families = list(product(config.latent_dims, config.map_degrees))
    n_m = len(config.m_values)

    units = []
    for fi in range(len(families)):
        for t in range(trials):
            ds_index = fi * trials + t
            for mi, m in enumerate(config.m_values):
                cell = ds_index * n_m + mi
                units.append(_Unit(key=(fi, t, mi), axis=fi, m=m, trial=ds_index,
                                   data_seed=derive_seed(config.root_seed, _SEED_DATASET, cell),
                                   mask_seed=derive_seed(config.root_seed, _SEED_MASK, cell)))

    def work(unit: _Unit) -> List[TrialRecord]:
        latent_dim, map_degree = families[unit.axis]
        data = gen_parametric(n, latent_dim, map_degree, s, seed=unit.data_seed,
                              components=config.components)
        mask = sample_mask(n, s, unit.m, seed=unit.mask_seed)
        out = []
        for method in config.methods:
            d = get_method(method).d
            rank = lifted_rank(data.X, d, config.rel_tol).numerical_rank
            out.append(_solve_trial(method, data.X, mask, base, config.success_threshold,
                                    unit, rank, rank))
        return out

    logger.info("phase_parametric 시작: families=%s m=%s trials=%d methods=%s workers=%d",
                families, config.m_values, trials, config.methods, workers)
    records = _run_units(units, work, workers)

    seeds = {
        "datasets": {f"latent_dim={families[u.axis][0]},map_degree={families[u.axis][1]},"
                     f"m={u.m},trial={u.trial}": u.data_seed for u in units},
        "masks": {f"dataset={u.trial},m={u.m}": u.mask_seed for u in units},
    }
    return PhaseGrid(
        kind="phase_parametric", axis_name="R", n=n, s=s,
        methods=config.methods, m_values=config.m_values,
        cells=_aggregate(records, n, s, "empirical"), trials=records,
        manifest=build_manifest(config, workers, seeds),
    )


# ─────────────────────────────────────────────
# 벤치마크
# ─────────────────────────────────────────────

def mask_for_rate(n: int, s: int, missing_rate: float, seed: int = 0) -> ObservationMask:
    """결측률 → 열당 관측 수 m = n − round(rate·n)."""
    if not 0.0 <= missing_rate < 1.0:
        raise DomainError(f"missing rate must lie in [0, 1), got {missing_rate}")
    m = n - int(round(missing_rate * n))
    if m < 1:
        raise DomainError(f"missing rate {missing_rate} leaves no observed entries per column (n={n})")
    return sample_mask(n, s, m, seed=seed)


def run_bench(
    matrix_file: str,
    missing_rates: Optional[Sequence[float]] = None,
    methods: Optional[Sequence[str]] = None,
    config: Optional[ExperimentConfig] = None,
    num_threads: Optional[int] = None,
) -> BenchReport:
    """결측률마다 열별 균등 마스크 하나를 뽑고 (방법 간 공유) 완성 오차와 시간을 기록."""
    rates = tuple(missing_rates) if missing_rates is not None else None
    overrides: Dict[str, Any] = {"input": matrix_file}
    if rates is not None:
        overrides["missing_rates"] = rates
    if methods is not None:
        overrides["methods"] = tuple(methods)
    if config is None:
        config = ExperimentConfig(kind="bench", **overrides)
    else:
        _require_kind(config, "bench")
        config = ExperimentConfig(**{**config.to_dict(), **overrides})
    workers = num_threads or get_num_threads()

    observed = load_matrix_csv(matrix_file)
    if observed.n_missing:
        raise DomainError(f"bench input must be fully observed, {observed.n_missing} entries missing")
    X0 = observed.data
    n, s = X0.shape
    base = config.solver_config()

    masks = {
        ri: (rate, derive_seed(config.root_seed, _SEED_BENCH, ri))
        for ri, rate in enumerate(config.missing_rates)
    }
    units = [(ri, mi) for ri in masks for mi in range(len(config.methods))]

    def work(unit: Tuple[int, int]) -> BenchRow:
        ri, mi = unit
        rate, seed = masks[ri]
        method = config.methods[mi]
        mask = mask_for_rate(n, s, rate, seed)
        started = time.perf_counter()
        try:
            result = solve_with_method(method, apply_mask(X0, mask), base)
        except NumericalError as e:
            logger.warning("bench 실패 method=%s rate=%.2f: %s", method, rate, e)
            return BenchRow(method=method, missing_rate=rate, m=mask.per_column_count,
                            mask_seed=seed, completion_error=None,
                            seconds=time.perf_counter() - started, iterations=0,
                            converged=False, failed=True, message=str(e))
        return BenchRow(method=method, missing_rate=rate, m=mask.per_column_count,
                        mask_seed=seed, completion_error=completion_error(result.X_hat, X0),
                        seconds=time.perf_counter() - started,
                        iterations=result.iterations, converged=result.converged)

    rows: Dict[Tuple[int, int], BenchRow] = {}
    if workers <= 1:
        for unit in units:
            rows[unit] = work(unit)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_unit = {executor.submit(work, unit): unit for unit in units}
            for future in concurrent.futures.as_completed(future_to_unit):
                rows[future_to_unit[future]] = future.result()

    seeds = {"masks": {f"rate={rate}": seed for rate, seed in masks.values()}}
    logger.info("bench 완료: %s (%d rows)", matrix_file, len(rows))
    return BenchReport(
        input_path=matrix_file, input_sha256=file_sha256(matrix_file), n=n, s=s,
        rows=[rows[u] for u in sorted(rows)],
        manifest=build_manifest(config, workers, seeds),
    )


# ─────────────────────────────────────────────
# 디스패치 / 재실행
# ─────────────────────────────────────────────

def run_experiment(config: ExperimentConfig, num_threads: Optional[int] = None):
    if config.kind == "phase_uos":
        return run_phase_uos(config, num_threads)
    if config.kind == "phase_parametric":
        return run_phase_parametric(config, num_threads)
    if not config.input:
        raise ConfigError("bench config needs 'input'")
    return run_bench(config.input, config=config, num_threads=num_threads)


def replay(manifest: Dict[str, Any]):
    """manifest 에 기록된 설정과 스레드 수로 실험을 다시 실행."""
    config = config_from_manifest(manifest)
    return run_experiment(config, num_threads=int(manifest.get("num_threads", 1)))
