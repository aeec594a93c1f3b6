# conftest.py — pytest 전역 설정
import hypothesis
import numpy as np
import pytest

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("fast")


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="phase transition 재현 등 수 분 걸리는 실험 테스트 실행",
    )


@pytest.fixture
def runslow(request):
    return request.config.getoption("--runslow", default=False)
