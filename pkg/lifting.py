"""
lifting.py — 단항식 특징 사상(monomial lifting)과 다항식 커널
==============================================================
데이터 행렬 X (n×s, 열 하나가 데이터 포인트 하나)를 차수 d 이하의 모든
단항식으로 들어올린 φ_d(X) (N×s)와, 그 Gram 행렬을 lift 없이 계산하는
polynomial kernel (xᵀy + 1)^d 를 다룬다.

설계 메모:
  - 단항식 순서는 graded lexicographic (총차수 오름차순, 같은 차수 안에서는
    x1 지수가 큰 것부터). 상수항이 항상 첫 번째.
  - 명시적 lift 는 N·s ≤ 10⁷ 일 때만 허용. 그 이상은 kernel 경로만 사용.
  - numerical rank 는 λ_i > rel_tol·λ_max 인 고유값 개수 (기본 1e-8).
  - 반올림으로 생긴 음의 고유값은 0으로 clamp.
"""

from __future__ import annotations

import logging
import operator
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations_with_replacement
from math import factorial
from typing import Tuple

import numpy as np
from scipy import linalg
from scipy.special import comb

from errors import ArithmeticOverflowError, DomainError, LiftTooLargeError, NumericalError

logger = logging.getLogger(__name__)

LIFT_BUDGET = 10_000_000          # 명시적 lift 허용 원소 수 (N·s)
DEFAULT_REL_TOL = 1e-8
_INT64_MAX = int(np.iinfo(np.int64).max)


# ─────────────────────────────────────────────
# 도메인 타입
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class MultiIndex:
    """단항식 x^α 의 지수 벡터 α = (α_1, …, α_n)."""
    exponents: Tuple[int, ...]

    def __post_init__(self) -> None:
        if any(e < 0 for e in self.exponents):
            raise DomainError(f"multi-index exponents must be non-negative: {self.exponents}")

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def multinomial_weight(self) -> int:
        """(xᵀy + 1)^d 전개 계수 c_α 를 만들기 위한 α! (d 와 무관한 부분)."""
        out = 1
        for e in self.exponents:
            out *= factorial(e)
        return out


@dataclass(frozen=True)
class MonomialBasis:
    """차수 ≤ d 인 n변수 단항식 전체, graded-lex 순서."""
    n: int
    d: int
    entries: Tuple[MultiIndex, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> MultiIndex:
        return self.entries[i]

    @cached_property
    def exponents(self) -> np.ndarray:
        """N×n 정수 배열. 행 i 가 entries[i] 의 지수."""
        if not self.entries:
            return np.zeros((0, self.n), dtype=np.int64)
        arr = np.array([m.exponents for m in self.entries], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        """√c_α,  c_α = d! / (α_1!···α_n!·(d−|α|)!)."""
        d_fact = factorial(self.d)
        w = np.array(
            [d_fact // (m.multinomial_weight * factorial(self.d - m.degree)) for m in self.entries],
            dtype=np.float64,
        )
        out = np.sqrt(w)
        out.setflags(write=False)
        return out

    def index_of(self, exponents: Tuple[int, ...]) -> int:
        """지수 튜플의 basis 내 위치. 없으면 DomainError."""
        try:
            return self._positions[tuple(int(e) for e in exponents)]
        except KeyError:
            raise DomainError(f"{exponents} is not in the degree-{self.d} basis") from None

    @cached_property
    def _positions(self) -> dict:
        return {m.exponents: i for i, m in enumerate(self.entries)}


@dataclass(frozen=True)
class RankReport:
    """lifted_rank() 반환값."""
    eigenvalues: np.ndarray      # clamp 후, 내림차순
    numerical_rank: int
    rel_tol: float
    N: int
    s: int

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0]) if self.eigenvalues.size else 0.0


# ─────────────────────────────────────────────
# 정수 조합 (overflow guard)
# ─────────────────────────────────────────────

def _as_count(value, name: str) -> int:
    try:
        out = operator.index(value)
    except TypeError:
        raise DomainError(f"{name} must be an integer, got {value!r}") from None
    if out < 0:
        raise DomainError(f"{name} must be non-negative, got {out}")
    return out


def binomial(top: int, k: int) -> int:
    """정확한 C(top, k). int64 범위를 넘으면 ArithmeticOverflowError."""
    top = _as_count(top, "top")
    k = _as_count(k, "k")
    if k > top:
        return 0
    value = int(comb(top, k, exact=True))
    if value > _INT64_MAX:
        raise ArithmeticOverflowError(f"C({top}, {k}) exceeds the 64-bit integer range")
    return value


def feature_dimension(n: int, d: int) -> int:
    """N(n, d) = C(n+d, d): n변수 차수 ≤ d 단항식 개수."""
    n = _as_count(n, "n")
    d = _as_count(d, "d")
    if n < 1:
        raise DomainError("ambient dimension n must be >= 1")
    return binomial(n + d, d)


@lru_cache(maxsize=64)
def monomial_basis(n: int, d: int) -> MonomialBasis:
    """graded-lex 순서의 중복 없는 단항식 basis. 길이 = feature_dimension(n, d)."""
    N = feature_dimension(n, d)
    entries = []
    for degree in range(d + 1):
        # combinations_with_replacement 는 변수 인덱스 multiset 을 사전식으로 내놓음
        # → (x1^deg, x1^{deg-1} x2, …) 순서가 됨
        for combo in combinations_with_replacement(range(n), degree):
            exps = [0] * n
            for var in combo:
                exps[var] += 1
            entries.append(MultiIndex(tuple(exps)))
    assert len(entries) == N
    return MonomialBasis(n=n, d=d, entries=tuple(entries))


# ─────────────────────────────────────────────
# 입력 검증
# ─────────────────────────────────────────────

def as_data_matrix(X, name: str = "X") -> np.ndarray:
    """2차원, 유한값, n ≥ 1, s ≥ 1 인 float64 배열로 변환."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError(f"{name} must be a 2-D matrix (n×s), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DomainError(f"{name} must have n >= 1 rows and s >= 1 columns, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


# ─────────────────────────────────────────────
# 명시적 lift
# ─────────────────────────────────────────────

def _check_budget(N: int, s: int, budget: int) -> None:
    if N * s > budget:
        raise LiftTooLargeError(
            f"lift too large ({N}×{s} = {N * s} entries > {budget}), use kernel path"
        )


def lift(X, d: int, budget: int = LIFT_BUDGET) -> np.ndarray:
    """φ_d(X): (α 위치, 열 i) 원소 = x_i^α. 행 순서는 monomial_basis 와 동일."""
    X = as_data_matrix(X)
    n, s = X.shape
    _check_budget(feature_dimension(n, d), s, budget)
    basis = monomial_basis(n, d)

    E = basis.exponents
    out = np.ones((len(basis), s), dtype=np.float64)
    for j in range(n):
        col_exp = E[:, j]
        if not col_exp.any():
            continue
        # 0**0 == 1 이므로 0 지수 행은 그대로 1
        out *= np.power(X[j][None, :], col_exp[:, None])
    return out


def weighted_lift(X, d: int, budget: int = LIFT_BUDGET) -> np.ndarray:
    """φ̃_d(X) = √c_α · x^α.  φ̃ᵀφ̃ = kernel_matrix(X, X, d)."""
    Y = lift(X, d, budget)
    basis = monomial_basis(np.shape(X)[0], d)
    return Y * basis.sqrt_weights[:, None]


# ─────────────────────────────────────────────
# 커널 경로
# ─────────────────────────────────────────────

def kernel_matrix(X, Y, d: int) -> np.ndarray:
    """k_d(X, Y) = (XᵀY + 1)^{⊙d}, s×t."""
    X = as_data_matrix(X, "X")
    Y = as_data_matrix(Y, "Y")
    d = _as_count(d, "d")
    if X.shape[0] != Y.shape[0]:
        raise DomainError(
            f"dimension mismatch: X has n={X.shape[0]} rows, Y has n={Y.shape[0]}"
        )
    return np.power(X.T @ Y + 1.0, d)


def symmetric_eig(K: np.ndarray, eigvals_only: bool = False):
    """scipy.linalg.eigh 래퍼. 실패 시 NumericalError 에 진단 정보를 담아 던짐."""
    K = np.asarray(K, dtype=np.float64)
    try:
        return linalg.eigh(K, eigvals_only=eigvals_only, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        finite = bool(np.all(np.isfinite(K)))
        max_abs = float(np.nanmax(np.abs(K))) if K.size else 0.0
        raise NumericalError(
            f"symmetric eigendecomposition failed for {K.shape} matrix "
            f"(finite={finite}, max|K|={max_abs:.3e}): {exc}"
        ) from exc


def count_above(eigenvalues: np.ndarray, rel_tol: float) -> int:
    """λ_i > rel_tol·λ_max 인 개수. λ_max = 0 이면 0."""
    if eigenvalues.size == 0:
        return 0
    lam_max = float(np.max(eigenvalues))
    if lam_max <= 0.0:
        return 0
    return int(np.count_nonzero(eigenvalues > rel_tol * lam_max))


def lifted_rank(X, d: int, rel_tol: float = DEFAULT_REL_TOL) -> RankReport:
    """kernel Gram 행렬의 고유값으로 rank φ_d(X) 를 추정. lift 는 만들지 않음."""
    if not (0.0 < rel_tol < 1.0):
        raise DomainError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    X = as_data_matrix(X)
    n, s = X.shape
    N = feature_dimension(n, d)

    eigs = symmetric_eig(kernel_matrix(X, X, d), eigvals_only=True)
    eigs = np.clip(eigs[::-1], 0.0, None)
    rank = min(count_above(eigs, rel_tol), N, s)

    logger.debug("lifted_rank n=%d s=%d d=%d → R̂=%d (λmax=%.3e)", n, s, d, rank,
                 eigs[0] if eigs.size else 0.0)
    return RankReport(eigenvalues=eigs, numerical_rank=rank, rel_tol=rel_tol, N=N, s=s)


# ─────────────────────────────────────────────
# 소멸 다항식 / Schatten-p
# ─────────────────────────────────────────────

def vanishing_coefficients(X, d: int, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """
    X 의 모든 열에서 0이 되는 차수 ≤ d 다항식들의 계수 (N×q, 정규직교 열).

    φ_d(X)ᵀ c ≈ 0 인 c 의 공간 = φ_d(X) 의 left null space.
    σ_i² > rel_tol·σ_max² 인 특이값을 rank 로 세므로 lifted_rank 와 같은 기준.
    """
    if not (0.0 < rel_tol < 1.0):
        raise DomainError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    Y = lift(X, d)
    try:
        U, sig, _ = linalg.svd(Y, full_matrices=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"SVD of {Y.shape} lifted matrix failed: {exc}") from exc
    rank = count_above(sig ** 2, rel_tol)
    return U[:, rank:]


def schatten_p(Y, p: float) -> float:
    """‖Y‖_{S_p}^p = Σ σ_i^p  (p = 1 이면 nuclear norm)."""
    if not (0.0 < p <= 1.0):
        raise DomainError(f"Schatten exponent p must lie in (0, 1], got {p}")
    sig = linalg.svdvals(np.asarray(Y, dtype=np.float64))
    return float(np.sum(sig ** p))


def schatten_p_from_gram(eigenvalues: np.ndarray, p: float) -> float:
    """Gram 고유값 λ_i = σ_i² 로부터 Σ σ_i^p = Σ λ_i^{p/2}."""
    lam = np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
    return float(np.sum(lam ** (p / 2.0)))
