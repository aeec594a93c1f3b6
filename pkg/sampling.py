"""
sampling.py — 자유도(degrees of freedom) 기반 표본 수 계산
==========================================================
feature space 에서 rank R 인 N×s 행렬을 유일하게 완성하려면 최소
R(N+s−R) 개의 관측이 필요하다. 열마다 m 개를 관측하면 feature space 에서는
열마다 M = C(m+d, d) 개가 관측되므로, 조건은

    M·s ≥ R·(N + s − R)

이 된다. 이 모듈은 이 조건을 만족하는 최소 m (= m0) 과 (아핀) 부분공간
합집합에 대한 rank 상한을 계산한다. 모두 순수 함수.

R 은 해석적 상한(subspace/uos_rank_bound) 또는 경험적 추정
(lifting.lifted_rank) 어느 쪽이든 넣을 수 있고, 출처는 SamplingBound.rank_source
에 기록된다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

from errors import DomainError
from lifting import binomial, feature_dimension

logger = logging.getLogger(__name__)

RANK_SOURCES = ("analytic", "empirical")


@dataclass(frozen=True)
class SamplingBound:
    """min_samples_per_column() 결과."""
    n: int
    s: int
    d: int
    R: int
    N: int
    m0: int
    M0: int
    rho0: float
    rank_source: str = "analytic"

    @property
    def required_entries(self) -> int:
        """R(N+s−R): feature space 에서 필요한 최소 관측 수."""
        return self.R * (self.N + self.s - self.R)


# ─────────────────────────────────────────────
# rank 상한
# ─────────────────────────────────────────────

def subspace_rank_bound(r: int, d: int) -> int:
    """r차원 아핀 부분공간 위 데이터의 rank φ_d(X) 상한 C(r+d, d)."""
    return binomial(r + d, d)


def uos_rank_bound(k: int, r: int, d: int) -> int:
    """r차원 부분공간 k 개 합집합의 상한 k·C(r+d, d)."""
    if k < 1:
        raise DomainError(f"number of subspaces k must be >= 1, got {k}")
    return k * subspace_rank_bound(r, d)


def mixed_uos_rank_bound(dims: Sequence[int], d: int) -> int:
    """차원이 서로 다른 부분공간 합집합: Σ C(r_i+d, d)."""
    if len(dims) == 0:
        raise DomainError("dims must name at least one subspace")
    return sum(subspace_rank_bound(r, d) for r in dims)


def orthogonal_union_rank(r: int, d: int) -> int:
    """서로 직교하는 r차원 선형 부분공간 두 개: 2·C(r+d, d) − 1 (상수항 공유)."""
    return 2 * subspace_rank_bound(r, d) - 1


# ─────────────────────────────────────────────
# 관측 개수 / 비율
# ─────────────────────────────────────────────

def observed_features(m: int, d: int) -> int:
    """열마다 m 개 관측 → feature space 관측 수 M = C(m+d, d)."""
    return binomial(m + d, d)


def ratio_bounds(m: int, n: int, d: int) -> Tuple[float, float]:
    """(m/n)^d ≤ M/N ≤ ((m+d)/n)^d."""
    if not (1 <= m <= n):
        raise DomainError(f"ratio_bounds needs 1 <= m <= n, got m={m}, n={n}")
    return (m / n) ** d, ((m + d) / n) ** d


def min_samples_per_column(
    n: int,
    s: int,
    d: int,
    R: int,
    rank_source: str = "analytic",
) -> SamplingBound:
    """
    M·s ≥ R(N+s−R) 를 만족하는 최소 m 을 0..n 전수 탐색으로 찾음.
    R ≤ min(N, s) 이면 m = n 에서 항상 만족.
    """
    if rank_source not in RANK_SOURCES:
        raise DomainError(f"rank_source must be one of {RANK_SOURCES}, got {rank_source!r}")
    if s < 1:
        raise DomainError(f"column count s must be >= 1, got {s}")
    N = feature_dimension(n, d)
    if not (1 <= R <= min(N, s)):
        raise DomainError(f"R must lie in [1, min(N, s)] = [1, {min(N, s)}], got {R}")

    required = R * (N + s - R)
    for m in range(n + 1):
        M = observed_features(m, d)
        if M * s >= required:
            return SamplingBound(
                n=n, s=s, d=d, R=R, N=N,
                m0=m, M0=M, rho0=m / n,
                rank_source=rank_source,
            )
    # R ≤ min(N, s) 이면 도달 불가
    raise AssertionError(f"no m in 0..{n} satisfies the sampling bound (n={n}, s={s}, d={d}, R={R})")


# ─────────────────────────────────────────────
# 근사 공식
# ─────────────────────────────────────────────

def rate_lower_bound(n: int, s: int, d: int, R: int) -> float:
    """ρ0 ≥ (R/s + (R/N)(1 − R/s))^{1/d}."""
    if d < 1:
        raise DomainError("rate_lower_bound needs d >= 1")
    N = feature_dimension(n, d)
    if not (1 <= R <= min(N, s)):
        raise DomainError(f"R must lie in [1, min(N, s)] = [1, {min(N, s)}], got {R}")
    return (R / s + (R / N) * (1.0 - R / s)) ** (1.0 / d)


def asymptotic_rate(n: int, d: int, R: int) -> float:
    """R/s ≪ 1 일 때 ρ0 ≈ (R/N)^{1/d}."""
    if d < 1:
        raise DomainError("asymptotic_rate needs d >= 1")
    N = feature_dimension(n, d)
    if not (1 <= R <= N):
        raise DomainError(f"R must lie in [1, N] = [1, {N}], got {R}")
    return (R / N) ** (1.0 / d)


def uos_sampling_heuristic(k: int, r: int, d: int) -> float:
    """k개 r차원 부분공간 합집합에서 열당 필요한 표본 수 ≈ k^{1/d}·r."""
    if k < 1 or r < 1 or d < 1:
        raise DomainError(f"need k, r, d >= 1, got k={k}, r={r}, d={d}")
    return k ** (1.0 / d) * r


def lrmc_sampling_heuristic(k: int, r: int) -> int:
    """같은 데이터에 대해 선형(LRMC) 방식이 필요로 하는 열당 표본 수 ≈ k·r."""
    if k < 1 or r < 1:
        raise DomainError(f"need k, r >= 1, got k={k}, r={r}")
    return k * r
