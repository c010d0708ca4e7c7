import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--regen-golden",
        action="store_true",
        default=False,
        help="rewrite tests/golden from the current build instead of comparing against it",
    )


@pytest.fixture
def regen_golden(request):
    return request.config.getoption("--regen-golden")
