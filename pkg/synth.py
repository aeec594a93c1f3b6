"""
synth.py — 재현 가능한 합성 데이터 생성기와 관측 마스크
========================================================
  - gen_uos        : k개의 r차원 (아핀) 부분공간 합집합
  - gen_parametric : 임의 다항식 사상 R^ℓ → R^n 으로 만든 곡선/곡면 (합집합 가능)
  - gen_conic      : 평면 2차 곡선 c0 + c1 x1 + c2 x2 + c3 x1² + c4 x1x2 + c5 x2² = 0
  - sample_mask    : 열마다 m개 행을 비복원 균등 추출
  - apply_mask     : 관측되지 않은 원소를 NaN 으로 명시한 ObservedMatrix

모든 생성기는 (spec, seed) 만의 순수 함수. 병렬 trial 의 seed 는
derive_seed(root_seed, index) 로 파생한다 (SplitMix64 믹싱).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from errors import DomainError
from lifting import as_data_matrix, feature_dimension, lift

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


# ─────────────────────────────────────────────
# seed 파생 (SplitMix64)
# ─────────────────────────────────────────────

def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(root_seed: int, *indices: int) -> int:
    """
    root seed 에 index 를 하나씩 더해 64비트 믹싱: h ← mix(h + i).
    인덱스 하나일 때 mix(root + i) 이고 mix 는 전단사이므로 서로 다른 i 는
    서로 다른 seed 를 준다.
    """
    h = int(root_seed) & _MASK64
    for i in indices:
        h = _splitmix64((h + int(i)) & _MASK64)
    return h


# ─────────────────────────────────────────────
# 데이터셋 명세
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class UnionOfSubspacesSpec:
    n: int
    k: int
    r: int
    points_per_subspace: int
    affine: bool = False
    orthogonal: bool = False
    variant: str = field(default="union_of_subspaces", init=False)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if not (1 <= self.r < self.n):
            raise DomainError(f"need 1 <= r < n, got r={self.r}, n={self.n}")
        if self.points_per_subspace < 1:
            raise DomainError("points_per_subspace must be >= 1")
        if self.orthogonal and self.k * self.r > self.n:
            raise DomainError(
                f"{self.k} mutually orthogonal {self.r}-dim subspaces do not fit in R^{self.n}"
            )

    @property
    def s(self) -> int:
        return self.k * self.points_per_subspace


@dataclass(frozen=True)
class ParametricSpec:
    n: int
    latent_dim: int
    map_degree: int = 2
    s: int = 300
    components: int = 1
    variant: str = field(default="parametric", init=False)

    def __post_init__(self) -> None:
        if self.latent_dim not in (1, 2, 3):
            raise DomainError(f"latent_dim must be 1, 2 or 3, got {self.latent_dim}")
        if self.latent_dim >= self.n:
            raise DomainError(f"latent_dim must be < n, got ℓ={self.latent_dim}, n={self.n}")
        if self.map_degree < 1:
            raise DomainError("map_degree must be >= 1")
        if self.s < 1:
            raise DomainError("s must be >= 1")
        if not (1 <= self.components <= self.s):
            raise DomainError(f"components must lie in [1, s], got {self.components}")


@dataclass(frozen=True)
class ConicSpec:
    coefficients: Tuple[float, float, float, float, float, float]
    s: int
    window: Tuple[float, float] = (-1.0, 1.0)
    variant: str = field(default="conic", init=False)

    def __post_init__(self) -> None:
        if len(self.coefficients) != 6:
            raise DomainError("conic needs exactly six coefficients c0..c5")
        if not any(float(c) != 0.0 for c in self.coefficients):
            raise DomainError("conic coefficients must not all be zero")
        if self.s < 1:
            raise DomainError("s must be >= 1")
        lo, hi = self.window
        if not lo < hi:
            raise DomainError(f"window must satisfy lo < hi, got {self.window}")

    @property
    def n(self) -> int:
        return 2


VarietySpec = Union[UnionOfSubspacesSpec, ParametricSpec, ConicSpec]

# x2 − x1² = 0 은 (0, 0, −1, 1, 0, 0) 과 부호만 다름
CONIC_PRESETS: Dict[str, Tuple[float, ...]] = {
    "circle": (-1.0, 0.0, 0.0, 1.0, 0.0, 1.0),
    "parabola": (0.0, 0.0, -1.0, 1.0, 0.0, 0.0),
}


def conic_preset(name: str, s: int) -> ConicSpec:
    try:
        coeffs = CONIC_PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown conic preset {name!r}; choose from {sorted(CONIC_PRESETS)}") from None
    return ConicSpec(coefficients=coeffs, s=s)


@dataclass(eq=False)
class GeneratedDataset:
    """생성된 ground-truth 데이터."""
    X: np.ndarray
    labels: Optional[np.ndarray]
    spec: VarietySpec
    seed: int

    @property
    def shape(self) -> Tuple[int, int]:
        return self.X.shape


# ─────────────────────────────────────────────
# 생성기
# ─────────────────────────────────────────────

def gen_uos(
    n: int,
    k: int,
    r: int,
    points_per_subspace: int,
    affine: bool = False,
    seed: int = 0,
    orthogonal: bool = False,
) -> GeneratedDataset:
    """
    k개의 r차원 부분공간 (QR 로 만든 정규직교 basis) 에서 각 점을 basis·w,
    w ~ N(0, I) 로 뽑는다. affine=True 면 부분공간마다 N(0, I) 오프셋을 더함.
    orthogonal=True 면 하나의 QR 에서 basis 를 잘라 서로 직교하게 만든다.
    열은 부분공간 순서로 묶이고 labels 에 부분공간 번호가 들어간다.
    """
    spec = UnionOfSubspacesSpec(
        n=n, k=k, r=r, points_per_subspace=points_per_subspace,
        affine=affine, orthogonal=orthogonal,
    )
    rng = np.random.default_rng(seed)

    if orthogonal:
        Q, _ = np.linalg.qr(rng.standard_normal((n, k * r)))
        bases = [Q[:, i * r:(i + 1) * r] for i in range(k)]
    else:
        bases = [np.linalg.qr(rng.standard_normal((n, r)))[0] for _ in range(k)]

    blocks = []
    for U in bases:
        block = U @ rng.standard_normal((r, points_per_subspace))
        if affine:
            block = block + rng.standard_normal((n, 1))
        blocks.append(block)

    X = np.hstack(blocks)
    labels = np.repeat(np.arange(k), points_per_subspace)
    logger.debug("gen_uos n=%d k=%d r=%d s=%d affine=%s seed=%d", n, k, r, X.shape[1], affine, seed)
    return GeneratedDataset(X=X, labels=labels, spec=spec, seed=seed)


def gen_parametric(
    n: int,
    latent_dim: int,
    map_degree: int = 2,
    s: int = 300,
    seed: int = 0,
    components: int = 1,
) -> GeneratedDataset:
    """
    차수 ≤ map_degree 인 임의 다항식 사상 (계수 N(0,1)) 을 [−1,1]^ℓ 의 균등
    표본에 적용. components > 1 이면 독립 사상 여러 개의 합집합이고 s 는
    가능한 한 균등하게 나눈다. feature space rank 는 생성 후 lifted_rank 로 잰다.
    """
    spec = ParametricSpec(
        n=n, latent_dim=latent_dim, map_degree=map_degree, s=s, components=components,
    )
    rng = np.random.default_rng(seed)
    n_terms = feature_dimension(latent_dim, map_degree)

    blocks = []
    labels = []
    for c, chunk in enumerate(np.array_split(np.arange(s), components)):
        coeffs = rng.standard_normal((n, n_terms))
        latent = rng.uniform(-1.0, 1.0, size=(latent_dim, chunk.size))
        blocks.append(coeffs @ lift(latent, map_degree))
        labels.append(np.full(chunk.size, c))

    X = np.hstack(blocks)
    return GeneratedDataset(X=X, labels=np.concatenate(labels), spec=spec, seed=seed)


def _conic_roots(coeffs: np.ndarray, t: np.ndarray, rng: np.random.Generator):
    """x1 = t 일 때 x2 풀이. (유효 여부, x2) 반환."""
    c0, c1, c2, c3, c4, c5 = coeffs
    a = c5
    b = c2 + c4 * t
    cc = c0 + c1 * t + c3 * t * t

    if a == 0.0:
        valid = b != 0.0
        x2 = np.divide(-cc, b, out=np.zeros_like(t), where=valid)
        return valid, x2

    disc = b * b - 4.0 * a * cc
    valid = disc >= 0.0
    root = np.sqrt(np.where(valid, disc, 0.0))
    # 수치적으로 안정한 근의 공식
    q = -0.5 * (b + np.copysign(root, b))
    r1 = np.divide(q, a)
    r2 = np.divide(cc, q, out=np.zeros_like(t), where=q != 0.0)
    pick = rng.random(t.size) < 0.5
    return valid, np.where(pick, r1, r2)


def gen_conic(spec: ConicSpec, seed: int = 0, max_rounds: int = 200) -> GeneratedDataset:
    """x1 을 window 에서 균등 추출하고 x2 를 풀어 곡선 위 s개 점을 만든다."""
    coeffs = np.asarray(spec.coefficients, dtype=np.float64)
    # x2 가 식에 없으면 두 변수 역할을 바꿔서 푼다
    swapped = coeffs[2] == 0.0 and coeffs[4] == 0.0 and coeffs[5] == 0.0
    if swapped:
        coeffs = coeffs[[0, 2, 1, 5, 4, 3]]

    rng = np.random.default_rng(seed)
    lo, hi = spec.window
    batch = max(4 * spec.s, 64)
    xs, ys = [], []
    have = 0
    for _ in range(max_rounds):
        t = rng.uniform(lo, hi, size=batch)
        valid, x2 = _conic_roots(coeffs, t, rng)
        xs.append(t[valid])
        ys.append(x2[valid])
        have += int(valid.sum())
        if have >= spec.s:
            break
    if have < spec.s:
        raise DomainError(
            f"conic {tuple(spec.coefficients)} has no real solutions on window {spec.window}"
        )

    x1 = np.concatenate(xs)[: spec.s]
    x2 = np.concatenate(ys)[: spec.s]
    X = np.vstack([x2, x1]) if swapped else np.vstack([x1, x2])
    return GeneratedDataset(X=X, labels=None, spec=spec, seed=seed)


def regenerate(spec: VarietySpec, seed: int) -> GeneratedDataset:
    """(spec, seed) 로부터 같은 데이터셋을 다시 만든다."""
    if isinstance(spec, UnionOfSubspacesSpec):
        return gen_uos(spec.n, spec.k, spec.r, spec.points_per_subspace,
                       affine=spec.affine, seed=seed, orthogonal=spec.orthogonal)
    if isinstance(spec, ParametricSpec):
        return gen_parametric(spec.n, spec.latent_dim, spec.map_degree, spec.s,
                              seed=seed, components=spec.components)
    if isinstance(spec, ConicSpec):
        return gen_conic(spec, seed=seed)
    raise DomainError(f"unknown variety spec {spec!r}")


# ─────────────────────────────────────────────
# 관측 마스크
# ─────────────────────────────────────────────

@dataclass(eq=False)
class ObservationMask:
    """
    관측 집합 Ω. (rows[i], cols[i]) 가 i번째 관측 원소 (0-indexed).
    sample_mask 로 만들면 열마다 정확히 per_column_count 개.
    """
    n: int
    s: int
    rows: np.ndarray
    cols: np.ndarray
    per_column_count: Optional[int] = None

    def __post_init__(self) -> None:
        self.rows = np.asarray(self.rows, dtype=np.int64).ravel()
        self.cols = np.asarray(self.cols, dtype=np.int64).ravel()
        if self.rows.shape != self.cols.shape:
            raise DomainError("rows and cols must have the same length")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.n:
                raise DomainError(f"row index out of range [0, {self.n})")
            if self.cols.min() < 0 or self.cols.max() >= self.s:
                raise DomainError(f"column index out of range [0, {self.s})")
        flat = self.rows * self.s + self.cols
        if np.unique(flat).size != flat.size:
            raise DomainError("observation mask contains duplicate entries")

    def __len__(self) -> int:
        return int(self.rows.size)

    def to_bool(self) -> np.ndarray:
        out = np.zeros((self.n, self.s), dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def column_counts(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.s)

    @classmethod
    def from_bool(cls, observed: np.ndarray) -> "ObservationMask":
        observed = np.asarray(observed, dtype=bool)
        if observed.ndim != 2:
            raise DomainError("boolean mask must be 2-D")
        # 열 우선 순서
        cols, rows = np.nonzero(observed.T)
        counts = np.bincount(cols, minlength=observed.shape[1])
        uniform = int(counts[0]) if counts.size and np.all(counts == counts[0]) else None
        return cls(n=observed.shape[0], s=observed.shape[1], rows=rows, cols=cols,
                   per_column_count=uniform)


def sample_mask(n: int, s: int, m: int, seed: int = 0) -> ObservationMask:
    """열마다 {0..n−1} 에서 m개를 비복원 균등 추출 (열끼리 독립)."""
    if n < 1 or s < 1:
        raise DomainError(f"mask shape must be positive, got {n}×{s}")
    if not (0 <= m <= n):
        raise DomainError(f"need 0 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    # 열마다 독립 균등 순열의 앞 m개 = 균등한 m-부분집합
    order = np.argsort(rng.random((n, s)), axis=0, kind="stable")
    rows = np.sort(order[:m, :], axis=0)
    cols = np.broadcast_to(np.arange(s), (m, s))
    return ObservationMask(n=n, s=s, rows=rows.T.ravel(), cols=cols.T.ravel(),
                           per_column_count=m)


# ─────────────────────────────────────────────
# 관측 행렬
# ─────────────────────────────────────────────

@dataclass(eq=False)
class ObservedMatrix:
    """P_Ω(X): 관측 안 된 원소는 NaN 으로 표시 (0 이 아님)."""
    data: np.ndarray
    observed: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.data.ndim != 2 or self.data.shape != self.observed.shape:
            raise DomainError("data and observed mask must be 2-D arrays of the same shape")
        if not np.all(np.isfinite(self.data[self.observed])):
            raise DomainError("observed entries must be finite")
        self.data = np.where(self.observed, self.data, np.nan)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())

    @property
    def n_missing(self) -> int:
        return int(self.observed.size - self.n_observed)

    def mask(self) -> ObservationMask:
        return ObservationMask.from_bool(self.observed)

    def zero_filled(self) -> np.ndarray:
        return np.where(self.observed, self.data, 0.0)

    @classmethod
    def from_nan(cls, values: np.ndarray) -> "ObservedMatrix":
        """NaN 을 결측으로 보는 배열에서 생성 (CSV 로더용)."""
        values = np.asarray(values, dtype=np.float64)
        return cls(data=values, observed=~np.isnan(values))


def apply_mask(X, mask: ObservationMask) -> ObservedMatrix:
    """X 에 Ω 를 적용. 마스크 크기가 X 와 다르면 DomainError."""
    X = as_data_matrix(X)
    if (mask.n, mask.s) != X.shape:
        raise DomainError(f"mask shape {(mask.n, mask.s)} does not match X shape {X.shape}")
    return ObservedMatrix(data=X, observed=mask.to_bool())
