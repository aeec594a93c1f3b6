"""
errors.py — 공통 예외 계층
===========================
라이브러리 모듈은 아래 예외만 던지고, 종료 코드 변환은 CLI(vmc_cli.py)만 담당.

분류:
  - DomainError            : 잘못된 인자 / 범위 밖 파라미터        (exit 2)
  - ArithmeticOverflowError: 이항계수가 int64 범위 초과             (exit 2)
  - DataFormatError        : 파일 파싱 실패 (줄 번호 포함)          (exit 3)
  - NumericalError         : 고유분해 실패, 발산                    (exit 4)
"""

from __future__ import annotations

from typing import Optional


# ─────────────────────────────────────────────
# 커스텀 예외 계층
# ─────────────────────────────────────────────

class VarietyError(Exception):
    """패키지 오류의 공통 기반 클래스."""

    exit_code: int = 1


class DomainError(VarietyError, ValueError):
    """입력이 연산의 정의역을 벗어남 (차원 불일치, R 범위, m > n 등)."""

    exit_code = 2


class ConfigError(DomainError):
    """설정 파일의 알 수 없는 키 또는 해석 불가능한 값."""


class LiftTooLargeError(DomainError):
    """명시적 lift 가 N·s 예산을 넘음. kernel 경로를 써야 함."""


class ArithmeticOverflowError(VarietyError, OverflowError):
    """조합 개수가 부호 있는 64비트 정수 범위를 넘음."""

    exit_code = 2


class DataFormatError(VarietyError):
    """CSV/JSON 파일이 없거나 형식이 잘못됨."""

    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(VarietyError):
    """고유분해 실패 등 수치 계산 오류."""

    exit_code = 4


class DivergenceError(NumericalError):
    """IRLS 반복 중 비유한(NaN/inf) 값 발생."""

    def __init__(self, iteration: int, detail: str = "") -> None:
        msg = f"iteration {iteration}: non-finite entries in iterate"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.iteration = iteration


def exit_code_for(exc: BaseException) -> int:
    """예외 → CLI 종료 코드. 패키지 밖 예외는 1."""
    if isinstance(exc, VarietyError):
        return exc.exit_code
    return 1
