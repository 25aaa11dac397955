"""Spectral densities on a uniform frequency grid and their Fourier coefficients.

All frequency-domain work in the package happens on the grid

    lambda_j = -pi + 2*pi*j/G,  j = 0, ..., G-1,

and Fourier coefficients follow the convention

    c(k) = (1/2pi) * integral F(lambda) exp(-i*lambda*k) dlambda,

so that F(lambda) = sum_k c(k) exp(i*lambda*k).  The trapezoid rule on this
grid is a discrete Fourier transform and is exact for trigonometric
polynomials of degree < G/2, which covers every moving-average density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Union

import numpy as np

from .errors import MinimalityError, ValidationError

DEFAULT_GRID = 4096
DEFAULT_MAX_LAG = 256


def _check_grid_size(G: int) -> int:
    G = int(G)
    if G < 16 or G & (G - 1):
        raise ValidationError(f"grid size must be a power of two >= 16, got {G}")
    return G


def frequency_grid(G: int) -> np.ndarray:
    """Uniform nodes over [-pi, pi) used by every grid routine."""
    G = _check_grid_size(G)
    return -np.pi + 2.0 * np.pi * np.arange(G) / G


def _unit_phasor(G: int) -> np.ndarray:
    """exp(-i*lambda_j) on the grid."""
    return np.exp(-1j * frequency_grid(G))


def lag_transform(samples: np.ndarray) -> np.ndarray:
    """All G grid Fourier coefficients of ``samples``, indexed by lag mod G.

    ``out[k % G]`` is c(k) for -G/2 <= k < G/2.
    """
    samples = np.asarray(samples)
    G = samples.shape[-1]
    # exp(-i*lambda_j*k) = (-1)^k * exp(-2*pi*i*j*k/G) on this grid
    sign = np.where(np.arange(G) % 2 == 0, 1.0, -1.0)
    return np.fft.fft(samples, axis=-1) * sign / G


def inverse_lag_transform(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`lag_transform`: samples from lag-indexed coefficients."""
    coeffs = np.asarray(coeffs)
    G = coeffs.shape[-1]
    sign = np.where(np.arange(G) % 2 == 0, 1.0, -1.0)
    return np.fft.ifft(coeffs * sign, axis=-1) * G


def trig_series(coeffs, G: int, *, power: int = -1, offset: int = 0) -> np.ndarray:
    """Evaluate sum_k coeffs[k] * exp(i*power*lambda*(k+offset)) on the grid.

    ``power=-1`` gives one-sided series in exp(-i*lambda), as used for A(e^{i lambda})
    and canonical factors; ``power=+1`` with ``offset=1`` gives the correction
    series C(e^{i lambda}) = sum_k c(k) exp(i*lambda*(k+1)).
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    G = _check_grid_size(G)
    if coeffs.size == 0:
        return np.zeros(G, dtype=complex)
    n = coeffs.size
    if n + offset <= G // 2:
        # exact evaluation through one FFT of a zero-padded lag array
        lagged = np.zeros(G, dtype=complex)
        ks = (power * (np.arange(n) + offset)) % G
        lagged[ks] = coeffs
        return inverse_lag_transform(lagged)
    lam = frequency_grid(G)
    k = np.arange(n) + offset
    return np.exp(1j * power * np.outer(lam, k)) @ coeffs


@dataclass(frozen=True)
class SpectralDensity:
    """A nonnegative density on [-pi, pi).

    ``kind="moving-average"`` stores b(0..q) and represents
    |sum_k b(k) exp(-i*lambda*k)|^2; ``kind="grid"`` stores samples on a
    uniform grid of size G and can only be evaluated on that grid or on a
    coarser power-of-two subgrid (no interpolation is ever performed).
    """

    kind: Literal["moving-average", "grid"]
    ma_coeffs: np.ndarray | None = None
    samples: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "moving-average":
            if self.ma_coeffs is None:
                raise ValidationError("moving-average density needs ma_coeffs")
            b = np.atleast_1d(np.asarray(self.ma_coeffs))
            if b.ndim != 1 or b.size == 0 or not np.all(np.isfinite(b)):
                raise ValidationError("ma_coeffs must be a finite 1-D sequence")
            b = b.astype(complex if np.iscomplexobj(b) else float)
            b.setflags(write=False)
            object.__setattr__(self, "ma_coeffs", b)
        elif self.kind == "grid":
            if self.samples is None:
                raise ValidationError("grid density needs samples")
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1:
                raise ValidationError("samples must be 1-D")
            _check_grid_size(s.size)
            if not np.all(np.isfinite(s)):
                raise ValidationError("density samples must be finite")
            if np.any(s < 0):
                j = int(np.argmin(s))
                raise ValidationError(
                    f"negative density sample {s[j]:.3g} at lambda={frequency_grid(s.size)[j]:.6f}"
                )
            s = s.copy()
            s.setflags(write=False)
            object.__setattr__(self, "samples", s)
        else:
            raise ValidationError(f"unknown density kind {self.kind!r}")

    @classmethod
    def moving_average(cls, coeffs) -> "SpectralDensity":
        return cls("moving-average", ma_coeffs=np.asarray(coeffs))

    @classmethod
    def white(cls, variance: float = 1.0) -> "SpectralDensity":
        if variance < 0:
            raise ValidationError("variance must be nonnegative")
        return cls("moving-average", ma_coeffs=np.array([np.sqrt(variance)]))

    @classmethod
    def from_samples(cls, samples) -> "SpectralDensity":
        return cls("grid", samples=np.asarray(samples, dtype=float))

    @property
    def is_real_symmetric(self) -> bool:
        """True when d(lambda) = d(-lambda) is guaranteed by construction."""
        if self.kind == "moving-average":
            return not np.iscomplexobj(self.ma_coeffs)
        s = self.samples
        # reflection lambda_j -> -lambda_j maps j to (G - j) mod G
        return bool(np.allclose(s, s[(-np.arange(s.size)) % s.size], rtol=0, atol=1e-14 * max(1.0, s.max())))

    def evaluate(self, G: int = DEFAULT_GRID) -> np.ndarray:
        return evaluate_density(self, G)

    def autocovariance(self) -> np.ndarray:
        """Exact lag coefficients d(0..q) of a moving-average density."""
        if self.kind != "moving-average":
            raise ValidationError("autocovariance is exact only for moving-average densities")
        b = self.ma_coeffs
        q = b.size - 1
        return np.array([np.sum(b[: b.size - k] * np.conj(b[k:])) for k in range(q + 1)])


DensityLike = Union[SpectralDensity, np.ndarray]


def evaluate_density(d: DensityLike, G: int = DEFAULT_GRID) -> np.ndarray:
    """Samples of ``d`` on the grid of size ``G``."""
    G = _check_grid_size(G)
    if isinstance(d, SpectralDensity):
        if d.kind == "moving-average":
            b = d.ma_coeffs
            # Horner in z = exp(-i*lambda) is exact at the nodes up to round-off
            vals = np.polyval(b[::-1], _unit_phasor(G))
            return np.abs(vals) ** 2
        n = d.samples.size
        if G == n:
            return np.array(d.samples)
        if G > n:
            raise ValidationError(f"grid density of size {n} cannot be refined to {G}")
        return np.array(d.samples[:: n // G])
    arr = np.asarray(d, dtype=float)
    if arr.shape != (G,):
        raise ValidationError(f"expected {G} samples, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError("density samples must be finite and nonnegative")
    return arr


def native_grid_size(d: DensityLike) -> int | None:
    """The only grid a sampled density lives on, or None for analytic kinds."""
    if isinstance(d, SpectralDensity):
        return d.samples.size if d.kind == "grid" else None
    return np.asarray(d).shape[-1]


@dataclass(frozen=True)
class FourierSeries:
    """Fourier coefficients c(-K..K) of a function sampled on a grid.

    ``residual`` is the largest coefficient modulus at lags K/2 < |k| < G/2
    (including lags that were dropped), ``tail_energy`` the squared l2 mass
    at lags |k| > K that the truncation discards.
    """

    coeffs: np.ndarray
    max_lag: int
    grid_size: int
    residual: float
    tail_energy: float
    convention: str = field(default="c(k) = (1/2pi) int F(l) exp(-i l k) dl")

    def __getitem__(self, k):
        k = np.asarray(k)
        if np.any(np.abs(k) > self.max_lag):
            raise IndexError(f"lag outside [-{self.max_lag}, {self.max_lag}]")
        return self.coeffs[k + self.max_lag]

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.max_lag, self.max_lag + 1)

    def hermitian_defect(self) -> float:
        """max_k |c(-k) - conj(c(k))|; zero for real-valued sources."""
        return float(np.max(np.abs(self.coeffs[::-1] - np.conj(self.coeffs))))

    def energy(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


def fourier_coefficients(
    F: np.ndarray | Callable[[np.ndarray], np.ndarray],
    K: int = DEFAULT_MAX_LAG,
    G: int | None = None,
) -> FourierSeries:
    """Fourier coefficients of grid samples (or of a callable evaluated on the grid).

    Raises :class:`MinimalityError` when ``F`` is not finite at some node, which is
    how a vanishing ``f+g`` surfaces when forming ``1/(f+g)``.
    """
    if callable(F):
        if G is None:
            G = DEFAULT_GRID
        samples = np.asarray(F(frequency_grid(G)))
    else:
        samples = np.asarray(F)
        if G is not None and samples.shape[-1] != G:
            raise ValidationError(f"expected {G} samples, got {samples.shape[-1]}")
    G = _check_grid_size(samples.shape[-1])
    K = int(K)
    if K < 0 or K >= G // 2:
        raise ValidationError(f"max lag K={K} must satisfy 0 <= K < G/2 = {G // 2}")
    bad = ~np.isfinite(samples)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        lam = float(frequency_grid(G)[j])
        raise MinimalityError(f"non-finite function value at lambda={lam:.6f}", frequency=lam)
    full = lag_transform(samples)
    k = np.arange(-K, K + 1)
    coeffs = full[k % G]
    spare = np.arange(K // 2 + 1, G // 2)
    spare = np.concatenate([spare, -spare])
    residual = float(np.max(np.abs(full[spare % G]))) if spare.size else 0.0
    outside = np.ones(G, dtype=bool)
    outside[k % G] = False
    tail = float(np.sum(np.abs(full[outside]) ** 2))
    coeffs.setflags(write=False)
    return FourierSeries(coeffs, K, G, residual, tail)


@dataclass(frozen=True)
class MinimalityReport:
    passes: bool
    integral: float
    refined_integral: float
    grid_sizes: tuple[int, int]
    offending_frequency: float | None = None
    reason: str = ""


def minimality_check(
    f: DensityLike,
    g: DensityLike,
    G: int = DEFAULT_GRID,
    tol: float = 1e-6,
    *,
    floor: float = 1e-13,
) -> MinimalityReport:
    """Decide integrability of 1/(f+g) by grid-refinement stability.

    Analytic (moving-average) densities are compared between G and 2G; sampled
    densities cannot be refined and are compared between G/2 and G instead.
    A node where ``f+g <= floor * max(f+g)`` counts as a zero and fails.
    """
    G = _check_grid_size(G)
    sampled = native_grid_size(f) is not None or native_grid_size(g) is not None
    sizes = (G // 2, G) if sampled else (G, 2 * G)
    if sizes[0] < 16:
        raise ValidationError("grid too small for a refinement comparison")
    estimates = []
    for n in sizes:
        s = evaluate_density(f, n) + evaluate_density(g, n)
        top = float(np.max(s)) if s.size else 0.0
        bad = s <= floor * max(top, np.finfo(float).tiny)
        if np.any(bad):
            j = int(np.argmin(s))
            lam = float(frequency_grid(n)[j])
            return MinimalityReport(
                False, np.inf, np.inf, sizes, lam, f"f+g vanishes at lambda={lam:.6f}"
            )
        estimates.append(float(np.mean(1.0 / s)))
    coarse, fine = estimates
    ok = abs(fine - coarse) < tol
    reason = "" if ok else f"integral moved by {abs(fine - coarse):.3g} under refinement"
    return MinimalityReport(ok, coarse, fine, sizes, None, reason)


def require_minimal(f_samples: np.ndarray, g_samples: np.ndarray, *, floor: float = 1e-13) -> np.ndarray:
    """Return f+g after checking it stays away from zero on the grid."""
    s = np.asarray(f_samples) + np.asarray(g_samples)
    top = float(np.max(s))
    if not np.all(np.isfinite(s)) or top <= 0 or np.any(s <= floor * top):
        j = int(np.argmin(np.where(np.isfinite(s), s, -np.inf)))
        lam = float(frequency_grid(s.size)[j])
        raise MinimalityError(f"f+g vanishes at lambda={lam:.6f}: minimality condition fails", frequency=lam)
    return s
