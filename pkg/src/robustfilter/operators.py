"""Truncated l2 operators built from Fourier coefficients of f, g and their ratios.

Index conventions, with p, s, q the Fourier coefficients of 1/(f+g), f/(f+g)
and fg/(f+g)::

    (P)_{l,k}   = P_{l,k} = p(l-k)                     l, k >= 0
    (R)_{l,m}   = R_{l+1,m} = s(l+1+m)                 row_offset = 1
    (Q)_{l,k}   = Q_{l,k} = q(l-k)
    (R_N), (Q_N)  as R and Q restricted to columns 0..N
    (Y)_{k,l}   = P_{-k,l+1} = p(-(k+l+1))             col_offset = 1
    V           = P^{-1}

For real even densities (Y)_{k,l} equals P_{k,-(l+1)}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg as sla

from .errors import IllConditionedWarning, MinimalityError, ValidationError
from .spectral import (
    DEFAULT_GRID,
    DensityLike,
    evaluate_density,
    lag_transform,
    native_grid_size,
    require_minimal,
)

if TYPE_CHECKING:
    from .factorization import FactorCoeffs

OPERATOR_KINDS = ("P", "R", "Q", "R_N", "Q_N", "Y", "V", "G", "T", "Psi", "Theta", "Phi", "Upsilon")
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class OperatorMatrix:
    """A finite section of an l2 operator.

    ``entries[i, j]`` is the operator element with row index ``i + row_offset``
    and column index ``j + col_offset`` in the defining Fourier-coefficient
    notation (e.g. R has ``row_offset=1`` because (R)_{l,m} = R_{l+1,m}).
    """

    kind: str
    entries: np.ndarray
    truncation: int
    row_offset: int = 0
    col_offset: int = 0

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValidationError(f"unknown operator kind {self.kind!r}")
        e = np.asarray(self.entries)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __matmul__(self, other):
        other = other.entries if isinstance(other, OperatorMatrix) else other
        return self.entries @ other

    def hermitian_defect(self) -> float:
        e = self.entries
        return float(np.max(np.abs(e - e.conj().T))) if e.shape[0] == e.shape[1] else np.inf


class SpectralPair:
    """Signal and noise densities sampled on one grid, with cached coefficients.

    Every lag array below is indexed by ``k % G`` (see ``spectral.lag_transform``)
    and is accurate for |k| < G/2.
    """

    def __init__(self, f: np.ndarray, g: np.ndarray):
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if f.shape != g.shape or f.ndim != 1:
            raise ValidationError("f and g must be 1-D samples on the same grid")
        self.f = f
        self.g = g
        self.G = f.size
        self.total = require_minimal(f, g)
        reflect = (-np.arange(self.G)) % self.G
        # even densities have real coefficients; drop round-off imaginary parts
        tol = 1e-13 * float(np.max(self.total))
        self.even = bool(
            np.allclose(f, f[reflect], rtol=0, atol=tol) and np.allclose(g, g[reflect], rtol=0, atol=tol)
        )

    def _transform(self, samples: np.ndarray) -> np.ndarray:
        c = lag_transform(samples)
        return c.real.copy() if self.even else c

    @classmethod
    def from_densities(cls, f: DensityLike, g: DensityLike, G: int | None = None) -> "SpectralPair":
        if isinstance(f, SpectralPair):
            return f
        if G is None:
            G = native_grid_size(f) or native_grid_size(g) or DEFAULT_GRID
        return cls(evaluate_density(f, G), evaluate_density(g, G))

    @cached_property
    def p(self) -> np.ndarray:
        return self._transform(1.0 / self.total)

    @cached_property
    def s(self) -> np.ndarray:
        return self._transform(self.f / self.total)

    @cached_property
    def q(self) -> np.ndarray:
        return self._transform(self.f * self.g / self.total)

    @cached_property
    def f_coeffs(self) -> np.ndarray:
        return self._transform(self.f)

    @cached_property
    def g_coeffs(self) -> np.ndarray:
        return self._transform(self.g)

    def lag(self, name: str, k) -> np.ndarray:
        k = np.asarray(k)
        if np.any(np.abs(k) >= self.G // 2):
            raise ValidationError(f"lag {int(np.max(np.abs(k)))} not resolved by a grid of {self.G}")
        return getattr(self, name)[k % self.G]


def as_pair(f, g=None, G: int | None = None) -> SpectralPair:
    if isinstance(f, SpectralPair):
        return f
    if g is None:
        raise ValidationError("a noise density is required")
    return SpectralPair.from_densities(f, g, G)


def build_operator(kind: str, f, g=None, L: int = 64, N: int | None = None, *, G: int | None = None) -> OperatorMatrix:
    """Assemble the L-truncation of one of P, R, Q, R_N, Q_N, Y (see module docstring)."""
    pair = as_pair(f, g, G)
    L = int(L)
    if L < 1:
        raise ValidationError("truncation L must be positive")
    i = np.arange(L)
    if kind == "P":
        return OperatorMatrix("P", pair.lag("p", i[:, None] - i[None, :]), L)
    if kind == "Q":
        return OperatorMatrix("Q", pair.lag("q", i[:, None] - i[None, :]), L)
    if kind == "R":
        return OperatorMatrix("R", pair.lag("s", i[:, None] + 1 + i[None, :]), L, row_offset=1)
    if kind == "Y":
        return OperatorMatrix("Y", pair.lag("p", -(i[:, None] + i[None, :] + 1)), L, col_offset=1)
    if kind in ("R_N", "Q_N"):
        if N is None or N < 0:
            raise ValidationError(f"{kind} needs N >= 0")
        m = np.arange(N + 1)
        if kind == "R_N":
            return OperatorMatrix("R_N", pair.lag("s", i[:, None] + 1 + m[None, :]), L, row_offset=1)
        return OperatorMatrix("Q_N", pair.lag("q", m[:, None] - m[None, :]), L)
    if kind == "V":
        return invert_P(build_operator("P", pair, L=L))
    raise ValidationError(f"cannot build operator of kind {kind!r}")


def invert_P(P: OperatorMatrix, theta: "FactorCoeffs | None" = None) -> OperatorMatrix:
    """V = P^{-1}, by Cholesky or, given the factor theta of f+g, as conj(Theta) Theta'."""
    L = P.truncation
    if theta is not None:
        from .factorization import triangular_operator

        Theta = triangular_operator(theta, L).entries
        return OperatorMatrix("V", np.conj(Theta) @ Theta.T, L)
    e = P.entries
    try:
        cho = sla.cho_factor(e, lower=True)
    except np.linalg.LinAlgError:
        raise MinimalityError(
            f"P truncation is not positive definite (condition ~ {np.linalg.cond(e):.3g})"
        ) from None
    V = sla.cho_solve(cho, np.eye(L, dtype=e.dtype))
    return OperatorMatrix("V", V, L)


@dataclass(frozen=True)
class CoefficientSolve:
    """Solution of P c = R a with its diagnostics."""

    c: np.ndarray
    residual: float
    condition: float
    method: str


def solve_coefficients(P: OperatorMatrix, R: OperatorMatrix, a, *, cond_limit: float = CONDITION_LIMIT) -> CoefficientSolve:
    """Solve R a = P c for c(0..L-1).

    Uses a Cholesky factorization of P; when the condition estimate exceeds
    ``cond_limit`` it falls back to least squares and warns.
    """
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValidationError("a must be a 1-D coefficient vector")
    Rm = R.entries
    if a.size > Rm.shape[1]:
        if np.any(a[Rm.shape[1]:] != 0):
            raise ValidationError(f"functional has {a.size} coefficients but the truncation holds {Rm.shape[1]}")
        a = a[: Rm.shape[1]]
    elif a.size < Rm.shape[1]:
        a = np.concatenate([a, np.zeros(Rm.shape[1] - a.size, dtype=a.dtype)])
    Ra = Rm @ a
    Pm = P.entries
    cond = float(np.linalg.cond(Pm))
    if cond > cond_limit:
        warnings.warn(
            f"P is ill-conditioned (cond ~ {cond:.3g}); using least squares",
            IllConditionedWarning,
            stacklevel=2,
        )
        c = np.linalg.lstsq(Pm, Ra, rcond=None)[0]
        method = "lstsq"
    else:
        try:
            c = sla.cho_solve(sla.cho_factor(Pm, lower=True), Ra)
            method = "cholesky"
        except np.linalg.LinAlgError:
            c = np.linalg.lstsq(Pm, Ra, rcond=None)[0]
            method = "lstsq"
    scale = np.linalg.norm(Ra)
    residual = float(np.linalg.norm(Pm @ c - Ra) / scale) if scale > 0 else float(np.linalg.norm(Pm @ c))
    return CoefficientSolve(c, residual, cond, method)
