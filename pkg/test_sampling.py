"""
test_sampling.py — 표본 수 하한 / rank 상한 테스트
===================================================
실행 방법:
    python -m pytest test_sampling.py -v
"""
from __future__ import annotations

from itertools import combinations_with_replacement

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DomainError
from sampling import (
    asymptotic_rate,
    lrmc_sampling_heuristic,
    min_samples_per_column,
    mixed_uos_rank_bound,
    observed_features,
    orthogonal_union_rank,
    ratio_bounds,
    rate_lower_bound,
    subspace_rank_bound,
    uos_rank_bound,
    uos_sampling_heuristic,
)


def _count_monomials(m: int, d: int) -> int:
    """m변수 차수 ≤ d 단항식을 직접 나열해서 셈 (여분 변수 하나 추가한 크기 d 다중집합)."""
    return sum(1 for _ in combinations_with_replacement(range(m + 1), d))


def _brute_force_m0(n: int, s: int, d: int, R: int) -> int:
    N = _count_monomials(n, d)
    need = R * (N + s - R)
    for m in range(n + 1):
        if _count_monomials(m, d) * s >= need:
            return m
    raise AssertionError("unreachable")


# ─────────────────────────────────────────────
# rank 상한
# ─────────────────────────────────────────────

class TestRankBounds:

    def test_subspace(self):
        assert subspace_rank_bound(3, 2) == 10
        assert subspace_rank_bound(1, 3) == 4

    def test_union(self):
        assert uos_rank_bound(3, 3, 2) == 30
        assert uos_rank_bound(6, 3, 2) == 60

    def test_union_needs_k(self):
        with pytest.raises(DomainError):
            uos_rank_bound(0, 3, 2)

    def test_mixed_dims(self):
        assert mixed_uos_rank_bound([3, 2], 2) == 16
        assert mixed_uos_rank_bound([3, 3, 3], 2) == uos_rank_bound(3, 3, 2)
        with pytest.raises(DomainError):
            mixed_uos_rank_bound([], 2)

    def test_orthogonal_union(self):
        assert orthogonal_union_rank(2, 2) == 11


# ─────────────────────────────────────────────
# 최소 표본 수
# ─────────────────────────────────────────────

class TestMinSamples:

    @pytest.mark.parametrize("n,s,d,R,expected", [
        (15, 300, 2, 30, 8),
        (15, 400, 2, 40, 9),
        (15, 600, 2, 60, 11),
    ])
    def test_pinned(self, n, s, d, R, expected):
        bound = min_samples_per_column(n, s, d, R)
        assert bound.m0 == expected
        assert bound.M0 == observed_features(expected, d)
        assert bound.rho0 == pytest.approx(expected / n)
        assert bound.rank_source == "analytic"

    def test_required_entries(self):
        bound = min_samples_per_column(15, 300, 2, 30)
        assert bound.required_entries == 30 * (136 + 300 - 30)
        assert bound.M0 * bound.s >= bound.required_entries

    @settings(max_examples=200)
    @given(
        n=st.integers(min_value=1, max_value=15),
        s=st.integers(min_value=1, max_value=500),
        d=st.integers(min_value=1, max_value=3),
        frac=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_matches_brute_force(self, n, s, d, frac):
        N = _count_monomials(n, d)
        R = 1 + int(frac * (min(N, s) - 1))
        bound = min_samples_per_column(n, s, d, R)
        assert bound.m0 == _brute_force_m0(n, s, d, R)
        # 최소성
        need = R * (N + s - R)
        assert _count_monomials(bound.m0, d) * s >= need
        if bound.m0 > 0:
            assert _count_monomials(bound.m0 - 1, d) * s < need

    @settings(max_examples=100)
    @given(
        n=st.integers(min_value=2, max_value=15),
        d=st.integers(min_value=1, max_value=3),
        R=st.integers(min_value=1, max_value=60),
        s=st.integers(min_value=1, max_value=400),
        extra=st.integers(min_value=1, max_value=400),
    )
    def test_m0_monotone(self, n, d, R, s, extra):
        """열이 늘면 m0 는 줄거나 같고, rank 가 늘면 늘거나 같음."""
        N = observed_features(n, d)
        R = min(R, N, s)
        fewer = min_samples_per_column(n, s, d, R).m0
        assert min_samples_per_column(n, s + extra, d, R).m0 <= fewer
        if R < min(N, s):
            assert min_samples_per_column(n, s, d, R + 1).m0 >= fewer

    @settings(max_examples=100)
    @given(
        n=st.integers(min_value=1, max_value=15),
        s=st.integers(min_value=1, max_value=500),
        d=st.integers(min_value=1, max_value=3),
        frac=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_ratio_form_of_bound(self, n, s, d, frac):
        """M0/N ≥ R/s + (R/N)(1 − R/s), 바로 아래 m 은 불만족."""
        N = observed_features(n, d)
        R = 1 + int(frac * (min(N, s) - 1))
        bound = min_samples_per_column(n, s, d, R)
        rhs = R / s + (R / N) * (1.0 - R / s)
        assert bound.M0 / N >= rhs - 1e-12
        if bound.m0 > 0:
            assert observed_features(bound.m0 - 1, d) / N < rhs + 1e-12
        assert rate_lower_bound(n, s, d, R) == pytest.approx(rhs ** (1.0 / d))

    def test_full_rank_forces_full_sampling(self):
        """R = min(N, s) 이면 ρ0 = 1."""
        assert min_samples_per_column(4, 100, 2, 15).rho0 == 1.0   # R = N
        assert min_samples_per_column(4, 8, 2, 8).rho0 == 1.0      # R = s < N

    @pytest.mark.parametrize("R", [0, 137, -3])
    def test_rank_out_of_range(self, R):
        with pytest.raises(DomainError):
            min_samples_per_column(15, 300, 2, R)

    def test_rank_source(self):
        bound = min_samples_per_column(15, 300, 2, 30, rank_source="empirical")
        assert bound.rank_source == "empirical"
        with pytest.raises(DomainError):
            min_samples_per_column(15, 300, 2, 30, rank_source="guess")


# ─────────────────────────────────────────────
# 비율 근사
# ─────────────────────────────────────────────

class TestRates:

    @pytest.mark.parametrize("n,d", [(15, 2), (20, 3), (7, 1)])
    def test_ratio_bounds_hold(self, n, d):
        N = observed_features(n, d)
        for m in range(1, n + 1):
            lo, hi = ratio_bounds(m, n, d)
            assert lo <= observed_features(m, d) / N <= hi

    def test_ratio_bounds_domain(self):
        with pytest.raises(DomainError):
            ratio_bounds(16, 15, 2)

    @pytest.mark.parametrize("n,s,d,R", [(15, 300, 2, 30), (15, 600, 2, 60), (20, 300, 3, 40)])
    def test_rate_lower_bound_close_to_m0(self, n, s, d, R):
        rho0 = min_samples_per_column(n, s, d, R).rho0
        assert rate_lower_bound(n, s, d, R) <= rho0 + d / n

    def test_asymptotic_rate(self):
        assert asymptotic_rate(15, 2, 136) == pytest.approx(1.0)
        assert asymptotic_rate(15, 2, 34) == pytest.approx(0.5)

    def test_heuristics(self):
        assert uos_sampling_heuristic(8, 3, 3) == pytest.approx(6.0)
        assert uos_sampling_heuristic(4, 3, 1) == pytest.approx(lrmc_sampling_heuristic(4, 3))
        assert lrmc_sampling_heuristic(6, 3) == 18
        with pytest.raises(DomainError):
            uos_sampling_heuristic(0, 3, 2)
