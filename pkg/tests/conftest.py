import numpy as np
import pytest

from levy_burgers.spectral import FourierField


def sawtooth(max_mode: int) -> FourierField:
    """Truncated Fourier series of 1/2 - x on [0, 1): u_k = -i / (2 pi k)."""
    k = np.arange(1, max_mode + 1)
    return FourierField(-1j / (2 * np.pi * k))


def random_field(rng, max_mode: int, decay: float = 1.0) -> FourierField:
    k = np.arange(1, max_mode + 1)
    return FourierField((rng.standard_normal(max_mode) + 1j * rng.standard_normal(max_mode)) / k**decay)


def basis_cos(max_mode: int) -> FourierField:
    """e_1 = sqrt(2) cos(2 pi x)."""
    c = np.zeros(max_mode)
    c[0] = 1.0
    return FourierField.from_real_basis(c, np.zeros(max_mode))


def sine(max_mode: int) -> FourierField:
    """sin(2 pi x) = e_{-1} / sqrt(2)."""
    s = np.zeros(max_mode)
    s[0] = 1.0 / np.sqrt(2.0)
    return FourierField.from_real_basis(np.zeros(max_mode), s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record(criterion, ok: bool, detail: str) -> bool:
    """Log one acceptance outcome; shown in the terminal summary."""
    tag = f"criterion {criterion}" if isinstance(criterion, int) else str(criterion)
    line = f"{tag}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
