"""
test_synth.py — 합성 데이터 생성기 / 관측 마스크 테스트
========================================================
실행 방법:
    python -m pytest test_synth.py -v
"""
from __future__ import annotations

import numpy as np
import pytest

from errors import DomainError
from lifting import binomial, lift, lifted_rank, monomial_basis
from synth import (
    ConicSpec,
    ObservationMask,
    ObservedMatrix,
    ParametricSpec,
    UnionOfSubspacesSpec,
    apply_mask,
    conic_preset,
    derive_seed,
    gen_conic,
    gen_parametric,
    gen_uos,
    regenerate,
    sample_mask,
)


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _composed_coefficients(coeffs: np.ndarray, latent_dim: int, map_degree: int, d: int) -> np.ndarray:
    """
    x = coeffs · φ_{map_degree}(u) 를 φ_d 의 각 단항식 x^α 에 대입해 전개.
    반환 행렬 C 는 φ_d(x) = C · φ_{d·map_degree}(u) 를 만족.
    """
    n = coeffs.shape[0]
    latent_basis = [m.exponents for m in monomial_basis(latent_dim, map_degree)]
    coords = [dict(zip(latent_basis, row)) for row in coeffs]
    target = monomial_basis(latent_dim, d * map_degree)
    rows = []
    for alpha in monomial_basis(n, d):
        poly = {(0,) * latent_dim: 1.0}
        for j, power in enumerate(alpha.exponents):
            for _ in range(power):
                poly = _poly_mul(poly, coords[j])
        row = np.zeros(len(target))
        for e, c in poly.items():
            row[target.index_of(e)] += c
        rows.append(row)
    return np.array(rows)


# ─────────────────────────────────────────────
# seed 파생
# ─────────────────────────────────────────────

class TestDeriveSeed:

    def test_deterministic(self):
        assert derive_seed(42, 3) == derive_seed(42, 3)
        assert derive_seed(42, 1, 2) == derive_seed(42, 1, 2)

    def test_distinct_indices(self):
        seeds = {derive_seed(2024, i) for i in range(5000)}
        assert len(seeds) == 5000

    def test_64bit_range(self):
        for i in range(100):
            assert 0 <= derive_seed(-1, i) < 2**64

    def test_depends_on_root(self):
        assert derive_seed(1, 0) != derive_seed(2, 0)


# ─────────────────────────────────────────────
# 부분공간 합집합
# ─────────────────────────────────────────────

class TestGenUos:

    def test_shape_and_labels(self):
        data = gen_uos(15, 3, 3, 100, seed=1)
        assert data.X.shape == (15, 300)
        assert data.labels.shape == (300,)
        assert list(np.bincount(data.labels)) == [100, 100, 100]
        assert np.all(np.diff(data.labels) >= 0)
        assert isinstance(data.spec, UnionOfSubspacesSpec)
        assert data.spec.s == 300

    def test_reproducible(self):
        a = gen_uos(15, 3, 3, 50, affine=True, seed=9)
        b = gen_uos(15, 3, 3, 50, affine=True, seed=9)
        assert a.X.tobytes() == b.X.tobytes()
        c = regenerate(a.spec, a.seed)
        assert a.X.tobytes() == c.X.tobytes()

    def test_seed_changes_data(self):
        assert not np.array_equal(gen_uos(6, 2, 2, 5, seed=0).X, gen_uos(6, 2, 2, 5, seed=1).X)

    @pytest.mark.parametrize("seed", range(5))
    def test_single_subspace_rank(self, seed):
        X = gen_uos(12, 1, 4, 40, seed=seed).X
        sig = np.linalg.svd(X, compute_uv=False)
        assert int(np.sum(sig > 1e-8 * sig[0])) == 4

    def test_lifted_rank_within_union_bound(self):
        X = gen_uos(15, 3, 3, 100, seed=4).X
        assert lifted_rank(X, 2).numerical_rank <= 30

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_union_ceiling_all_degrees(self, d):
        for seed in range(3):
            data = gen_uos(8, 2, 2, 60, affine=seed % 2 == 1, seed=seed)
            assert lifted_rank(data.X, d).numerical_rank <= 2 * binomial(2 + d, d)

    def test_orthogonal_bases(self):
        data = gen_uos(10, 2, 2, 30, orthogonal=True, seed=3)
        A, B = data.X[:, :30], data.X[:, 30:]
        np.testing.assert_allclose(A.T @ B, 0.0, atol=1e-10)

    @pytest.mark.parametrize("kwargs", [
        dict(n=5, k=2, r=5, points_per_subspace=10),
        dict(n=5, k=0, r=2, points_per_subspace=10),
        dict(n=5, k=2, r=2, points_per_subspace=0),
        dict(n=5, k=3, r=2, points_per_subspace=10, orthogonal=True),
    ])
    def test_invalid_dimensions(self, kwargs):
        with pytest.raises(DomainError):
            gen_uos(**kwargs)


# ─────────────────────────────────────────────
# 다항식 곡선 / 곡면
# ─────────────────────────────────────────────

class TestGenParametric:

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_line_rank(self, d):
        """ℓ=1, map_degree=1 → 직선 → rank = d + 1."""
        X = gen_parametric(20, 1, 1, 300, seed=5).X
        assert lifted_rank(X, d).numerical_rank == d + 1

    @pytest.mark.parametrize("latent_dim,expected", [(1, 5), (2, 15)])
    def test_rank_matches_symbolic_composition(self, latent_dim, expected):
        """map_degree=2, d=2: 사상을 전개한 계수 행렬의 rank 와 lifted_rank 가 일치."""
        n, s, seed = 20, 300, 11
        X = gen_parametric(n, latent_dim, 2, s, seed=seed).X

        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal((n, binomial(latent_dim + 2, 2)))
        latent = rng.uniform(-1.0, 1.0, size=(latent_dim, s))
        np.testing.assert_array_equal(X, coeffs @ lift(latent, 2))

        C = _composed_coefficients(coeffs, latent_dim, 2, 2)
        assert C.shape == (binomial(n + 2, 2), binomial(latent_dim + 4, 4))
        np.testing.assert_allclose(C @ lift(latent, 4), lift(X, 2), rtol=1e-9, atol=1e-9)
        assert np.linalg.matrix_rank(C) == expected
        assert lifted_rank(X, 2, rel_tol=1e-10).numerical_rank == expected
        assert lifted_rank(X, 2).numerical_rank <= binomial(latent_dim + 4, latent_dim)

    def test_shape_and_spec(self):
        data = gen_parametric(4, 1, 1, 50, seed=2)
        assert data.X.shape == (4, 50)
        assert isinstance(data.spec, ParametricSpec)

    def test_components_split(self):
        data = gen_parametric(10, 1, 2, 31, seed=0, components=3)
        assert data.X.shape == (10, 31)
        assert list(np.bincount(data.labels)) == [11, 10, 10]

    def test_reproducible(self):
        a = gen_parametric(20, 2, 2, 100, seed=3, components=2)
        b = regenerate(a.spec, a.seed)
        assert a.X.tobytes() == b.X.tobytes()

    @pytest.mark.parametrize("kwargs", [
        dict(n=20, latent_dim=0),
        dict(n=20, latent_dim=4),
        dict(n=2, latent_dim=2),
        dict(n=20, latent_dim=1, map_degree=0),
        dict(n=20, latent_dim=1, s=5, components=6),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            gen_parametric(**kwargs)


# ─────────────────────────────────────────────
# 2차 곡선
# ─────────────────────────────────────────────

class TestGenConic:

    def test_parabola_exact(self):
        X = gen_conic(conic_preset("parabola", 20), seed=0).X
        assert X.shape == (2, 20)
        assert np.all(X[1] - X[0] ** 2 == 0.0)

    def test_circle(self):
        X = gen_conic(conic_preset("circle", 20), seed=1).X
        np.testing.assert_allclose(X[0] ** 2 + X[1] ** 2, 1.0, atol=1e-12)
        assert lifted_rank(X, 2).numerical_rank == 5
        # 위/아래 반원 모두 나와야 함
        assert np.any(X[1] > 0) and np.any(X[1] < 0)

    def test_window(self):
        spec = ConicSpec(coefficients=(0, 0, -1, 1, 0, 0), s=40, window=(0.5, 2.0))
        X = gen_conic(spec, seed=0).X
        assert np.all((X[0] >= 0.5) & (X[0] <= 2.0))

    def test_swaps_roles_when_x2_absent(self):
        """x1² = 1/4: x2 를 뽑고 x1 을 풀어야 함."""
        spec = ConicSpec(coefficients=(-0.25, 0, 0, 1, 0, 0), s=30)
        X = gen_conic(spec, seed=4).X
        np.testing.assert_allclose(np.abs(X[0]), 0.5)
        assert np.all(np.abs(X[1]) <= 1.0)

    def test_no_real_points(self):
        spec = ConicSpec(coefficients=(1, 0, 0, 1, 0, 1), s=10)
        with pytest.raises(DomainError, match="no real solutions"):
            gen_conic(spec, seed=0, max_rounds=5)

    def test_all_zero_coefficients(self):
        with pytest.raises(DomainError):
            ConicSpec(coefficients=(0, 0, 0, 0, 0, 0), s=10)

    def test_unknown_preset(self):
        with pytest.raises(DomainError):
            conic_preset("ellipse", 10)

    def test_reproducible(self):
        spec = conic_preset("circle", 25)
        assert gen_conic(spec, seed=8).X.tobytes() == gen_conic(spec, seed=8).X.tobytes()


# ─────────────────────────────────────────────
# 관측 마스크
# ─────────────────────────────────────────────

class TestSampleMask:

    def test_full(self):
        mask = sample_mask(5, 7, 5, seed=0)
        assert len(mask) == 35
        assert mask.to_bool().all()

    def test_empty(self):
        mask = sample_mask(5, 7, 0, seed=0)
        assert len(mask) == 0
        assert not mask.to_bool().any()

    def test_per_column_count(self):
        mask = sample_mask(15, 300, 8, seed=3)
        assert len(mask) == 2400
        assert mask.per_column_count == 8
        assert np.all(mask.to_bool().sum(axis=0) == 8)
        assert np.all(mask.column_counts() == 8)

    def test_m_greater_than_n(self):
        with pytest.raises(DomainError):
            sample_mask(5, 3, 6, seed=0)

    def test_reproducible(self):
        a, b = sample_mask(10, 20, 4, seed=5), sample_mask(10, 20, 4, seed=5)
        np.testing.assert_array_equal(a.rows, b.rows)
        np.testing.assert_array_equal(a.cols, b.cols)

    def test_uniform_inclusion(self):
        """n=10, m=3: 행별 포함 빈도가 0.3 의 5 표준오차 이내."""
        draws = 10_000
        freq = sample_mask(10, draws, 3, seed=123).to_bool().mean(axis=1)
        se = np.sqrt(0.3 * 0.7 / draws)
        assert np.all(np.abs(freq - 0.3) <= 5 * se)


class TestObservationMask:

    def test_duplicates_rejected(self):
        with pytest.raises(DomainError, match="duplicate"):
            ObservationMask(n=3, s=3, rows=[0, 0], cols=[1, 1])

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            ObservationMask(n=3, s=3, rows=[3], cols=[0])
        with pytest.raises(DomainError):
            ObservationMask(n=3, s=3, rows=[0], cols=[-1])

    def test_bool_round_trip(self):
        mask = sample_mask(6, 9, 2, seed=1)
        again = ObservationMask.from_bool(mask.to_bool())
        np.testing.assert_array_equal(again.to_bool(), mask.to_bool())
        assert again.per_column_count == 2


class TestApplyMask:

    def test_full_mask_round_trips(self):
        X = gen_uos(6, 2, 2, 5, seed=0).X
        obs = apply_mask(X, sample_mask(6, 10, 6, seed=0))
        assert obs.data.tobytes() == X.tobytes()
        assert obs.n_missing == 0

    def test_empty_mask_all_missing(self):
        X = np.ones((3, 4))
        obs = apply_mask(X, sample_mask(3, 4, 0, seed=0))
        assert np.isnan(obs.data).all()
        assert obs.n_observed == 0
        np.testing.assert_array_equal(obs.zero_filled(), np.zeros((3, 4)))

    def test_projection_idempotent(self):
        X = np.random.default_rng(0).standard_normal((8, 12))
        mask = sample_mask(8, 12, 3, seed=2)
        once = apply_mask(X, mask)
        twice = apply_mask(once.zero_filled(), mask)
        np.testing.assert_array_equal(once.observed, twice.observed)
        np.testing.assert_array_equal(once.data[once.observed], twice.data[twice.observed])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            apply_mask(np.ones((3, 4)), sample_mask(3, 5, 1, seed=0))

    def test_observed_matrix_from_nan(self):
        obs = ObservedMatrix.from_nan(np.array([[1.0, np.nan], [np.nan, 4.0]]))
        assert obs.n_observed == 2
        assert obs.mask().per_column_count == 1
        np.testing.assert_array_equal(obs.zero_filled(), [[1.0, 0.0], [0.0, 4.0]])

    def test_observed_entries_must_be_finite(self):
        with pytest.raises(DomainError):
            ObservedMatrix(data=np.array([[np.inf]]), observed=np.array([[True]]))
