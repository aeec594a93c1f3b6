"""
solver.py — kernelized IRLS 기반 행렬 완성
===========================================
lift 된 행렬 φ_d(X) 의 Schatten-p quasi-norm 을 줄이는 방향으로 결측값을
채운다. φ_d(X) 를 직접 만들지 않고 kernel Gram 행렬 K = (XᵀX + 1)^d 만 사용.

반복 한 번:
    K = k_d(X, X)
    W = (K + γI)^{−q},          q = 1 − p/2
    A = W ⊙ k_{d−1}(X, X)
    X ← X (I − τA),             τ = γ^q
    X ← P_Ω(X0) + P_{Ω^c}(X)
    γ ← max(γ/η, floor)

d = 1 이면 선형 kernel 이므로 일반적인 low-rank completion (LRMC) 이 된다:
p = 1 은 nuclear norm, p = 1/2 는 비볼록 버전.

설계 메모:
  - 정확한 gradient 는 2d·X(W ⊙ k_{d−1}) 이지만 상수 2d 는 τ 에 흡수한다.
  - γ0 자동값 = 0.1^d · λ_max(K(초기값)).
  - 수렴 판정: stop_window 번 반복마다 직전 checkpoint 대비 Ω^c 위의
    상대 Frobenius 변화량 < tol (Ω^c 가 비면 첫 반복에서 종료).
    stop_window=1 이면 step 단위 판정.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from errors import DivergenceError, DomainError, NumericalError
from lifting import symmetric_eig
from synth import ObservedMatrix

logger = logging.getLogger(__name__)

DEFAULT_SUCCESS_THRESHOLD = 1e-5


# ─────────────────────────────────────────────
# 설정 / 결과 객체
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class IrlsConfig:
    """IRLS 파라미터. gamma0=None 이면 자동 (gamma0_factor^d · λ_max)."""
    d: int = 2
    p: float = 0.5
    gamma0: Optional[float] = None
    gamma0_factor: float = 0.1
    eta: float = 1.01
    gamma_floor_rel: float = 1e-14
    max_iter: int = 5000
    tol: float = 1e-6
    stop_window: int = 100
    init: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    record_trace: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise DomainError(f"kernel degree d must be an integer >= 1, got {self.d!r}")
        if not (0.0 < self.p <= 1.0):
            raise DomainError(f"Schatten exponent p must lie in (0, 1], got {self.p}")
        if self.gamma0 is not None and not self.gamma0 > 0.0:
            raise DomainError(f"gamma0 must be positive, got {self.gamma0}")
        if not self.gamma0_factor > 0.0:
            raise DomainError("gamma0_factor must be positive")
        if not self.eta > 1.0:
            raise DomainError(f"eta must be > 1, got {self.eta}")
        if not (0.0 < self.gamma_floor_rel < 1.0):
            raise DomainError("gamma_floor_rel must lie in (0, 1)")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        if not self.tol > 0.0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if not isinstance(self.stop_window, (int, np.integer)) or self.stop_window < 1:
            raise DomainError(f"stop_window must be an integer >= 1, got {self.stop_window!r}")

    @property
    def q(self) -> float:
        return 1.0 - self.p / 2.0

    @property
    def init_mode(self) -> str:
        return "zero_fill" if self.init is None else "given"

    def with_overrides(self, **changes) -> "IrlsConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    gamma: float
    objective: float
    rel_change: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "gamma": self.gamma,
            "objective": self.objective,
            "rel_change": self.rel_change,
        }


@dataclass(frozen=True)
class SolveResult:
    """vmc_complete() / lrmc_complete() 반환값. X_hat 은 읽기 전용."""
    X_hat: np.ndarray
    iterations: int
    converged: bool
    final_gamma: float
    gamma0: float
    trace: Optional[Tuple[IterationRecord, ...]] = None


# ─────────────────────────────────────────────
# 구성 요소
# ─────────────────────────────────────────────

def initialize(observed: ObservedMatrix, init: Optional[np.ndarray] = None) -> np.ndarray:
    """
    zero_fill (init=None): Ω 밖은 0.
    given: init 을 복사한 뒤 Ω 위 원소를 관측값으로 덮어씀.
    """
    if init is None:
        return observed.zero_filled()
    init = np.asarray(init, dtype=np.float64)
    if init.shape != observed.shape:
        raise DomainError(f"init shape {init.shape} does not match observed shape {observed.shape}")
    if not np.all(np.isfinite(init)):
        raise DomainError("init contains non-finite entries")
    return np.where(observed.observed, observed.data, init)


def _gram(X: np.ndarray, d: int) -> np.ndarray:
    return np.power(X.T @ X + 1.0, d)


def _weights_and_spectrum(K: np.ndarray, gamma: float, q: float):
    K = 0.5 * (K + K.T)
    S, V = symmetric_eig(K)
    S = np.clip(S, 0.0, None)
    W = (V * np.power(S + gamma, -q)) @ V.T
    return 0.5 * (W + W.T), S


def weight_matrix(K, gamma: float, q: float) -> np.ndarray:
    """W = V (S + γI)^{−q} Vᵀ,  K = V S Vᵀ (음의 고유값은 0 으로 clamp)."""
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DomainError(f"K must be square, got shape {K.shape}")
    W, _ = _weights_and_spectrum(K, gamma, q)
    return W


def irls_step(
    X: np.ndarray,
    observed: ObservedMatrix,
    W: np.ndarray,
    tau: float,
    d: int,
    iteration: int = 0,
) -> np.ndarray:
    """X(I − τ·(W ⊙ k_{d−1}(X,X))) 후 Ω 위 원소 복원."""
    if tau < 0.0:
        raise DomainError(f"step size tau must be non-negative, got {tau}")
    X = np.asarray(X, dtype=np.float64)
    if X.shape != observed.shape:
        raise DomainError(f"X shape {X.shape} does not match observed shape {observed.shape}")
    if W.shape != (X.shape[1], X.shape[1]):
        raise DomainError(f"W must be {X.shape[1]}×{X.shape[1]}, got {W.shape}")

    with np.errstate(over="ignore", invalid="ignore"):
        A = W * _gram(X, d - 1)
        X_new = X - tau * (X @ A)
    if not np.all(np.isfinite(X_new)):
        raise DivergenceError(iteration, f"tau={tau:.3e}")
    return np.where(observed.observed, observed.data, X_new)


def surrogate_objective(eigenvalues, gamma: float, p: float) -> float:
    """Σ (λ_i + γ)^{p/2}: smoothing 된 Schatten-p 목적함수."""
    lam = np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
    return float(np.sum(np.power(lam + gamma, p / 2.0)))


def _relative_change(X_new: np.ndarray, X_old: np.ndarray, missing: np.ndarray) -> float:
    if not missing.any():
        return 0.0
    diff = np.linalg.norm(X_new[missing] - X_old[missing])
    scale = max(np.linalg.norm(X_new[missing]), np.linalg.norm(X_old[missing]))
    return float(diff / scale) if scale > 0.0 else 0.0


# ─────────────────────────────────────────────
# 메인 solver
# ─────────────────────────────────────────────

def vmc_complete(
    observed: ObservedMatrix,
    config: Optional[IrlsConfig] = None,
    on_iteration: Optional[Callable[[IterationRecord], None]] = None,
) -> SolveResult:
    """
    kernelized IRLS 로 관측 행렬을 완성.

    Args:
        observed:     결측을 NaN 으로 표시한 관측 행렬
        config:       IrlsConfig (기본값: d=2, p=1/2)
        on_iteration: 반복마다 IterationRecord 를 받는 콜백 (CLI --trace 용)

    Raises:
        DomainError:     관측값도 init 도 없음
        DivergenceError: 반복 중 비유한 값 발생
        NumericalError:  고유분해 실패
    """
    cfg = config or IrlsConfig()
    if observed.n_observed == 0 and cfg.init is None:
        raise DomainError("no observed entries and no explicit init")

    X = initialize(observed, cfg.init)
    missing = ~observed.observed
    d, p, q = cfg.d, cfg.p, cfg.q

    K = _gram(X, d)
    if cfg.gamma0 is not None:
        gamma0 = float(cfg.gamma0)
    else:
        lam_max = float(symmetric_eig(K, eigvals_only=True)[-1])
        gamma0 = cfg.gamma0_factor ** d * lam_max
        if not (np.isfinite(gamma0) and gamma0 > 0.0):
            raise NumericalError(f"automatic gamma0 is not positive (λ_max={lam_max:.3e})")
    floor = cfg.gamma_floor_rel * gamma0

    logger.debug("vmc_complete start: shape=%s observed=%d d=%d p=%.3f gamma0=%.3e",
                 observed.shape, observed.n_observed, d, p, gamma0)

    gamma = gamma0
    trace = [] if cfg.record_trace else None
    converged = False
    iteration = 0
    used_gamma = gamma
    checkpoint = X
    for iteration in range(1, cfg.max_iter + 1):
        if iteration > 1:
            K = _gram(X, d)
        if not np.all(np.isfinite(K)):
            raise DivergenceError(iteration, "kernel matrix overflow")
        W, spectrum = _weights_and_spectrum(K, gamma, q)
        X_new = irls_step(X, observed, W, gamma ** q, d, iteration=iteration)

        rel = _relative_change(X_new, X, missing)
        record = IterationRecord(
            iteration=iteration,
            gamma=gamma,
            objective=surrogate_objective(spectrum, gamma, p),
            rel_change=rel,
        )
        if trace is not None:
            trace.append(record)
        if on_iteration is not None:
            on_iteration(record)
        if iteration % 500 == 0:
            logger.debug("iter %d gamma=%.3e obj=%.6e rel=%.3e",
                         iteration, gamma, record.objective, rel)

        X = X_new
        used_gamma = gamma
        gamma = max(gamma / cfg.eta, floor)
        if not missing.any():
            converged = True
            break
        if iteration % cfg.stop_window == 0:
            if _relative_change(X, checkpoint, missing) < cfg.tol:
                converged = True
                break
            checkpoint = X

    X.setflags(write=False)
    logger.info("vmc_complete done: d=%d p=%.3f iterations=%d converged=%s",
                d, p, iteration, converged)
    return SolveResult(
        X_hat=X,
        iterations=iteration,
        converged=converged,
        final_gamma=used_gamma,
        gamma0=gamma0,
        trace=tuple(trace) if trace is not None else None,
    )


def lrmc_complete(
    observed: ObservedMatrix,
    p: float = 1.0,
    config: Optional[IrlsConfig] = None,
    on_iteration: Optional[Callable[[IterationRecord], None]] = None,
) -> SolveResult:
    """선형 kernel (d=1) 기준선. p=1: nuclear norm, p=1/2: 비볼록."""
    cfg = replace(config or IrlsConfig(), d=1, p=p)
    return vmc_complete(observed, cfg, on_iteration)


# ─────────────────────────────────────────────
# 방법 레지스트리
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class Method:
    name: str
    d: int
    p: float

    def configure(self, base: Optional[IrlsConfig] = None) -> IrlsConfig:
        return replace(base or IrlsConfig(), d=self.d, p=self.p)


METHODS: Dict[str, Method] = {
    "vmc_d2": Method("vmc_d2", d=2, p=0.5),
    "vmc_d3": Method("vmc_d3", d=3, p=0.5),
    "lrmc": Method("lrmc", d=1, p=1.0),
    "lrmc_ncvx": Method("lrmc_ncvx", d=1, p=0.5),
}


def get_method(name: str) -> Method:
    try:
        return METHODS[name]
    except KeyError:
        raise DomainError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None


def solve_with_method(
    name: str,
    observed: ObservedMatrix,
    base: Optional[IrlsConfig] = None,
    on_iteration: Optional[Callable[[IterationRecord], None]] = None,
) -> SolveResult:
    return vmc_complete(observed, get_method(name).configure(base), on_iteration)


# ─────────────────────────────────────────────
# 오차 지표
# ─────────────────────────────────────────────

def _matching_pair(X_hat, X0) -> Tuple[np.ndarray, np.ndarray]:
    X_hat = np.asarray(X_hat, dtype=np.float64)
    X0 = np.asarray(X0, dtype=np.float64)
    if X_hat.shape != X0.shape:
        raise DomainError(f"shape mismatch: {X_hat.shape} vs {X0.shape}")
    return X_hat, X0


def completion_error(X_hat, X0) -> float:
    """‖X̂ − X0‖_F / ‖X0‖_F."""
    X_hat, X0 = _matching_pair(X_hat, X0)
    ref = np.linalg.norm(X0)
    if ref == 0.0:
        raise DomainError("completion_error is undefined for a zero ground truth")
    return float(np.linalg.norm(X_hat - X0) / ref)


def column_errors(X_hat, X0) -> np.ndarray:
    """열별 ‖x̂ − x0‖/‖x0‖. ‖x0‖ = 0 인 열은 ‖x̂‖ (절대 오차)."""
    X_hat, X0 = _matching_pair(X_hat, X0)
    diff = np.linalg.norm(X_hat - X0, axis=0)
    ref = np.linalg.norm(X0, axis=0)
    return np.divide(diff, ref, out=diff.copy(), where=ref > 0.0)


def column_success_rate(X_hat, X0, threshold: float = DEFAULT_SUCCESS_THRESHOLD) -> float:
    """열별 상대 오차가 threshold 미만인 열의 비율."""
    errs = column_errors(X_hat, X0)
    return float(np.mean(errs < threshold))
