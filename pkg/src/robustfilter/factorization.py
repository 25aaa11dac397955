"""Canonical (minimum-phase) factorization of densities on the frequency grid.

A positive density d is written as d(lambda) = |sum_{k>=0} h(k) exp(-i*lambda*k)|^2
with h(0) > 0.  The factor is obtained by the cepstral method: the one-sided
part of (1/2) log d is exponentiated on the grid.  Applied to 1/(f+g),
f+g and f this yields the coefficients psi, theta and phi used by the
factorized filter formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import FactorizationDomainError, FactorizationError, ValidationError
from .operators import OperatorMatrix
from .spectral import (
    DEFAULT_MAX_LAG,
    DensityLike,
    evaluate_density,
    frequency_grid,
    inverse_lag_transform,
    lag_transform,
    native_grid_size,
    trig_series,
)

DEFAULT_FACTOR_LENGTH = DEFAULT_MAX_LAG // 2
FACTOR_TOL = 1e-8


@dataclass(frozen=True)
class FactorCoeffs:
    """One-sided factor coefficients h(0..L-1) of ``target``.

    ``residual`` is the relative sup-error of |H|^2 against the target on the
    grid, ``tail_mass`` the l2 mass at lags above L/2 (kept or dropped) and
    ``min_modulus`` the smallest |H(e^{-i lambda})| over the grid, which is
    positive for a minimum-phase factor without zeros on the circle.
    """

    coeffs: np.ndarray
    target: str
    residual: float
    tail_mass: float
    min_modulus: float

    def __len__(self) -> int:
        return self.coeffs.size

    def transfer(self, G: int) -> np.ndarray:
        """sum_k h(k) exp(-i*lambda*k) on the grid of size G."""
        return trig_series(self.coeffs, G)


def reconstruction_error(h, d: np.ndarray) -> float:
    """sup_lambda | |H|^2 - d | / max d."""
    coeffs = h.coeffs if isinstance(h, FactorCoeffs) else np.asarray(h)
    d = np.asarray(d)
    H = trig_series(coeffs, d.size)
    return float(np.max(np.abs(np.abs(H) ** 2 - d)) / np.max(np.abs(d)))


def spectral_factorize(
    d: DensityLike,
    L: int = DEFAULT_FACTOR_LENGTH,
    *,
    target: str = "d",
    G: int | None = None,
    tol: float = FACTOR_TOL,
) -> FactorCoeffs:
    """Minimum-phase factor of length L for a strictly positive density.

    Raises :class:`FactorizationDomainError` if ``d <= 0`` somewhere and
    :class:`FactorizationError` if the truncated factor misses the target by
    more than ``tol`` (relative sup norm).
    """
    if G is None:
        G = native_grid_size(d) or 4096
    samples = evaluate_density(d, G) if not isinstance(d, np.ndarray) else np.asarray(d, dtype=float)
    G = samples.size
    L = int(L)
    if L < 1 or L > G // 2:
        raise ValidationError(f"factor length L={L} must lie in [1, G/2]")
    if not np.all(np.isfinite(samples)) or np.any(samples <= 0):
        j = int(np.argmin(np.where(np.isfinite(samples), samples, -np.inf)))
        raise FactorizationDomainError(
            f"cannot factorize {target}: value {samples[j]:.3g} at lambda={frequency_grid(G)[j]:.6f}",
            frequency=float(frequency_grid(G)[j]),
        )
    cep = lag_transform(np.log(samples))
    # keep lags -n (series in exp(-i*lambda)), halve lag 0 and the Nyquist lag
    half = np.zeros(G, dtype=complex)
    half[0] = cep[0] / 2
    n = np.arange(1, G // 2)
    half[(-n) % G] = cep[(-n) % G]
    half[G // 2] = cep[G // 2] / 2
    H = np.exp(inverse_lag_transform(half))
    full = lag_transform(H)
    h = full[(-np.arange(G // 2)) % G]
    # phase convention: h(0) real and positive
    h = h * (np.conj(h[0]) / abs(h[0]))
    h[0] = abs(h[0])
    if np.allclose(h.imag, 0, atol=1e-14 * abs(h[0])) and np.isrealobj(samples):
        h = h.real
    kept = h[:L].copy()
    tail = float(np.sum(np.abs(h[L // 2 + 1:]) ** 2))
    residual = reconstruction_error(kept, samples)
    min_mod = float(np.min(np.abs(trig_series(kept, G))))
    if residual > tol:
        raise FactorizationError(
            f"factor of {target} with L={L} misses the target by {residual:.3g} (> {tol:.1g})",
            residual=residual,
        )
    kept.setflags(write=False)
    return FactorCoeffs(kept, target, residual, tail, min_mod)


def factor_product(psi: FactorCoeffs, phi: FactorCoeffs, *, target: np.ndarray | None = None) -> FactorCoeffs:
    """Truncated one-sided convolution upsilon(k) = sum_j psi(j) phi(k-j).

    When ``target`` samples are given the reconstruction residual is
    computed against them; otherwise it is reported as NaN.
    """
    if len(psi) != len(phi):
        raise ValidationError(f"factor lengths differ: {len(psi)} vs {len(phi)}")
    L = len(psi)
    u = np.convolve(psi.coeffs, phi.coeffs)[:L]
    u.setflags(write=False)
    name = f"({psi.target})*({phi.target})"
    if target is None:
        return FactorCoeffs(u, name, float("nan"), float(np.sum(np.abs(u[L // 2 + 1:]) ** 2)), float("nan"))
    G = np.asarray(target).size
    return FactorCoeffs(
        u,
        name,
        reconstruction_error(u, target),
        float(np.sum(np.abs(u[L // 2 + 1:]) ** 2)),
        float(np.min(np.abs(trig_series(u, G)))),
    )


_TRIANGULAR_KIND = {"1/(f+g)": "Psi", "f+g": "Theta", "f": "Phi", "f/(f+g)": "Upsilon"}


def triangular_operator(h, L: int, kind: str | None = None) -> OperatorMatrix:
    """L x L lower-triangular Toeplitz matrix with (H)_{k,j} = h(k-j) for j <= k."""
    coeffs = h.coeffs if isinstance(h, FactorCoeffs) else np.asarray(h)
    if kind is None:
        kind = _TRIANGULAR_KIND.get(getattr(h, "target", ""), "Psi")
    col = np.zeros(L, dtype=coeffs.dtype)
    n = min(L, coeffs.size)
    col[:n] = coeffs[:n]
    return OperatorMatrix(kind, toeplitz(col, np.zeros(L, dtype=coeffs.dtype)), L)


def gram_from_factor(h, L: int, kind: str = "P") -> OperatorMatrix:
    """H' conj(H) on the L-truncation: the Toeplitz operator of |sum h(k) e^{-i l k}|^2.

    The sum over the inner index runs to ``L + len(h)`` so that the leading
    block is not cut short by the truncation of H itself.
    """
    coeffs = h.coeffs if isinstance(h, FactorCoeffs) else np.asarray(h)
    M = L + coeffs.size
    H = triangular_operator(coeffs, M).entries
    return OperatorMatrix(kind, (H.T @ np.conj(H))[:L, :L], L)
