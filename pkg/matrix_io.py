"""
matrix_io.py — 행렬 / 마스크 / 실험 결과 파일 입출력
=====================================================
형식:
  - 행렬 CSV : 헤더 없음, 한 줄 = 한 행 (n 줄), 쉼표 구분.
               빈 칸 또는 NaN(대소문자 무관) = 결측. inf 는 허용하지 않음.
               저장 시 repr(float) (최단 왕복 표현) → 읽으면 비트 단위로 동일.
  - 마스크 CSV: 첫 줄 `row,col`, 이후 0-indexed 쌍 한 줄씩.
  - 결과 JSON : schema_version 필드 포함, 임시 파일에 쓴 뒤 교체 (원자성).
  - 결과 CSV  : JSON 과 같은 내용을 평평하게 펼친 표 (pandas).

파싱 오류는 모두 DataFormatError (1-based 줄 번호 포함).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from errors import DataFormatError, DomainError
from synth import ObservationMask, ObservedMatrix

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_MISSING_TOKENS = ("", "nan")


# ─────────────────────────────────────────────
# 공통 유틸
# ─────────────────────────────────────────────

def _atomic_write(path: str, text: str) -> None:
    """임시 파일에 먼저 저장 후 이동."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    temp_path = path + ".tmp"
    with open(temp_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(temp_path, path)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return f.read()
    except FileNotFoundError:
        raise DataFormatError(f"file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as e:
        raise DataFormatError(f"cannot read {path}: {e}") from e


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                h.update(chunk)
    except OSError as e:
        raise DataFormatError(f"cannot read {path}: {e}") from e
    return h.hexdigest()


# ─────────────────────────────────────────────
# 행렬 CSV
# ─────────────────────────────────────────────

def _parse_cell(token: str, line: int, col: int) -> float:
    tok = token.strip()
    if tok.lower() in _MISSING_TOKENS:
        return math.nan
    try:
        value = float(tok)
    except ValueError:
        raise DataFormatError(f"column {col}: non-numeric token {token!r}", line=line) from None
    if not math.isfinite(value):
        raise DataFormatError(f"column {col}: infinite value {token!r}", line=line)
    return value


def parse_matrix_csv(text: str) -> ObservedMatrix:
    rows: List[List[str]] = list(csv.reader(io.StringIO(text)))
    while rows and not rows[-1]:
        rows.pop()
    if not rows:
        raise DataFormatError("matrix file is empty")

    width = max(len(r) for r in rows) if rows else 0
    values: List[List[float]] = []
    for lineno, raw in enumerate(rows, start=1):
        # 빈 줄은 열 1개짜리 결측 칸
        cells = raw if raw else [""]
        if len(cells) != width:
            raise DataFormatError(
                f"ragged row: expected {width} cells, found {len(cells)}", line=lineno
            )
        values.append([_parse_cell(tok, lineno, j) for j, tok in enumerate(cells, start=1)])

    return ObservedMatrix.from_nan(np.array(values, dtype=np.float64))


def load_matrix_csv(path: str) -> ObservedMatrix:
    """행렬 CSV 로드. 결측은 NaN + observed=False."""
    observed = parse_matrix_csv(_read_text(path))
    logger.info("행렬 로드: %s shape=%s observed=%d", path, observed.shape, observed.n_observed)
    return observed


def format_matrix_csv(matrix) -> str:
    data = matrix.data if isinstance(matrix, ObservedMatrix) else np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2:
        raise DomainError(f"matrix must be 2-D, got shape {data.shape}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for row in data:
        writer.writerow(["" if math.isnan(v) else repr(float(v)) for v in row])
    return out.getvalue()


def save_matrix_csv(path: str, matrix) -> None:
    """ndarray 또는 ObservedMatrix 저장. NaN 은 빈 칸."""
    _atomic_write(path, format_matrix_csv(matrix))
    logger.info("행렬 저장: %s", path)


# ─────────────────────────────────────────────
# 마스크 CSV
# ─────────────────────────────────────────────

def load_mask_csv(path: str, n: int, s: int) -> ObservationMask:
    reader = csv.reader(io.StringIO(_read_text(path)))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != ["row", "col"]:
        raise DataFormatError("mask header must be 'row,col'", line=1)

    rows, cols = [], []
    for lineno, raw in enumerate(reader, start=2):
        if not raw:
            continue
        if len(raw) != 2:
            raise DataFormatError(f"expected 2 fields, found {len(raw)}", line=lineno)
        try:
            i, j = int(raw[0]), int(raw[1])
        except ValueError:
            raise DataFormatError(f"non-integer index pair {raw!r}", line=lineno) from None
        if not (0 <= i < n and 0 <= j < s):
            raise DataFormatError(f"index ({i}, {j}) out of range for {n}×{s}", line=lineno)
        rows.append(i)
        cols.append(j)

    try:
        mask = ObservationMask(n=n, s=s, rows=np.array(rows, dtype=np.int64),
                               cols=np.array(cols, dtype=np.int64))
    except DomainError as e:
        raise DataFormatError(f"{path}: {e}") from e
    counts = mask.column_counts()
    if counts.size and np.all(counts == counts[0]):
        mask.per_column_count = int(counts[0])
    return mask


def save_mask_csv(path: str, mask: ObservationMask) -> None:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["row", "col"])
    writer.writerows(zip(mask.rows.tolist(), mask.cols.tolist()))
    _atomic_write(path, out.getvalue())
    logger.info("마스크 저장: %s (|Ω|=%d)", path, len(mask))


# ─────────────────────────────────────────────
# JSON / 결과 저장
# ─────────────────────────────────────────────

def save_json(path: str, payload: Dict[str, Any]) -> None:
    data = {"schema_version": SCHEMA_VERSION, **payload}
    _atomic_write(path, json.dumps(data, ensure_ascii=False, indent=4))


def load_json(path: str) -> Dict[str, Any]:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    if not isinstance(data, dict):
        raise DataFormatError(f"{path}: top-level JSON value must be an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataFormatError(f"{path}: unsupported schema_version {version!r}")
    return data


def _save_table(path: str, records: List[Dict[str, Any]]) -> None:
    _atomic_write(path, pd.DataFrame.from_records(records).to_csv(index=False))


def save_grid(grid, out_prefix: str) -> Dict[str, str]:
    """PhaseGrid → <prefix>.json + <prefix>.csv. 작성한 경로 반환."""
    paths = {"json": out_prefix + ".json", "csv": out_prefix + ".csv"}
    save_json(paths["json"], grid.to_dict())
    _save_table(paths["csv"], grid.to_records())
    logger.info("phase grid 저장: %s", paths["json"])
    return paths


def save_report(report, out_prefix: str) -> Dict[str, str]:
    """BenchReport → <prefix>.json + <prefix>.csv."""
    paths = {"json": out_prefix + ".json", "csv": out_prefix + ".csv"}
    save_json(paths["json"], report.to_dict())
    _save_table(paths["csv"], report.to_records())
    logger.info("bench report 저장: %s", paths["json"])
    return paths
