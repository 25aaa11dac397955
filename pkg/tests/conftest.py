"""Shared fixtures and frozen reference values.

The moving-average example uses f = |1 - phi e^{-i l}|^2 and
g = |1 - psi e^{-i l}|^2 with phi = 0.6, psi = -0.4, so that
f + g = x |1 - y e^{-i l}|^2.  The closed forms below were derived
independently of the library (root pair, geometric series, projection
equations) and their numeric values are frozen.
"""

from __future__ import annotations

import numpy as np
import pytest

from robustfilter import SpectralDensity

PHI, PSI = 0.6, -0.4

# frozen: root pair of x(1+y^2) = 2+phi^2+psi^2, xy = phi+psi, |y| < 1
X_REF = 2.5040257232067145
Y_REF = 0.0798713839664056

# frozen: mean-square errors at (a, b) = (1, 1), (0, 1), (1, 0)
DELTA_REF = {(1.0, 1.0): 0.9072515064542834, (0.0, 1.0): 0.4307874630443449, (1.0, 0.0): 0.5287200016568679}


def root_pair(phi: float, psi: float) -> tuple[float, float]:
    S = 2 + phi**2 + psi**2
    s = phi + psi
    if s == 0:
        return S / 2.0, 0.0
    y = (S - np.sqrt(S**2 - 4 * s**2)) / (2 * s)
    return s / y, y


def example_weights(a: float, b: float, phi: float, psi: float, n: int) -> np.ndarray:
    """w(0..n-1) of the estimate of a xi(0) + b xi(-1).

    w(1) carries the b-term x^{-1}((1 - phi y + phi^2) + y (y - phi)(1 - phi y)),
    which follows from the geometric tail w(k) ~ y^k and the lag-1 projection equation.
    """
    x, y = root_pair(phi, psi)
    t = (y - phi) * (1 - phi * y)
    w = np.empty(n)
    w[0] = (a * (1 - phi * y + phi**2) + b * t) / x
    w[1] = a * t / x + b * ((1 - phi * y + phi**2) + y * t) / x
    k = np.arange(2, n)
    w[2:] = y ** (k - 2) * t * (b * y**2 + a * y + b) / x
    return w


def example_delta(a: float, b: float, phi: float, psi: float) -> float:
    """E|a xi(0) + b xi(-1)|^2 - sum_k w(k) b(k) with b(k) = E (a xi(0) + b xi(-1)) xi(-k)."""
    w = example_weights(a, b, phi, psi, 3)
    r0, r1 = 1 + phi**2, -phi
    target = (a * a + b * b) * r0 + 2 * a * b * r1
    cross = np.array([a * r0 + b * r1, a * r1 + b * r0, b * r1])
    return float(target - w @ cross)


def printed_weights(a: float, b: float, phi: float, psi: float, n: int) -> np.ndarray:
    """The weights exactly as printed in the source (w(1) b-term included verbatim)."""
    x, y = root_pair(phi, psi)
    t = (y - phi) * (1 - phi * y)
    w = np.empty(n)
    w[0] = (a * (1 - phi * y + phi**2) + b * t) / x
    w[1] = a * t / x + b * (1 - 2 * phi * y + phi**2 - y**3) / (x * (1 - y**2))
    k = np.arange(2, n)
    w[2:] = y ** (k - 2) * t * (b * y**2 + a * y + b) / x
    return w


def printed_delta(a: float, b: float, phi: float, psi: float) -> float:
    """The mean-square error exactly as printed in the source."""
    x, y = root_pair(phi, psi)
    t = (y - phi) ** 2 * (1 - phi * y) ** 2
    d = t / (x**2 * (1 - y**2))
    d += (a * a + b * b) / x * (1 + phi**2 * psi**2 + (y - phi - psi - y * phi * psi) / (1 - y**2))
    d += 2 * a * b / (x * (1 - y**2)) * (
        (y - phi - psi) * (1 - (phi + psi) * y + phi * psi * (1 + y * y)) + y * phi**2 * psi**2
    )
    return float(d)


@pytest.fixture
def example_pair():
    return SpectralDensity.moving_average([1.0, -PHI]), SpectralDensity.moving_average([1.0, -PSI])


@pytest.fixture
def white_pair():
    return SpectralDensity.white(1.0), SpectralDensity.white(1.0)


def random_ma2_pair(rng: np.random.Generator):
    """MA(2) + MA(2) with roots well inside the unit circle so f + g stays away from zero."""
    def ma2():
        r = rng.uniform(-0.7, 0.7, size=2)
        return np.array([1.0, -(r[0] + r[1]), r[0] * r[1]]) * rng.uniform(0.5, 1.5)

    return SpectralDensity.moving_average(ma2()), SpectralDensity.moving_average(ma2())


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """record(n, ok, detail): print one PASS/FAIL line and keep it for the session summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
