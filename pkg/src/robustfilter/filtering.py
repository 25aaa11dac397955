"""Optimal linear filters for functionals of a signal observed in additive noise.

The estimate of A xi = sum_k a(k) xi(-k) from xi(m)+eta(m), m <= 0, has the
spectral characteristic

    h(lambda) = A(e^{i lambda}) f/(f+g) - C(e^{i lambda})/(f+g),
    C(e^{i lambda}) = sum_k c(k) e^{i lambda (k+1)},   c = P^{-1} R a,

and mean-square error <Ra, P^{-1}Ra> + <Qa, a>.  The factorized route
computes the same h and error from the canonical factors of 1/(f+g) and f.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ValidationError
from .factorization import (
    DEFAULT_FACTOR_LENGTH,
    FactorCoeffs,
    gram_from_factor,
    spectral_factorize,
    triangular_operator,
)
from .operators import SpectralPair, as_pair, build_operator, invert_P, solve_coefficients
from .spectral import lag_transform, trig_series

DEFAULT_TRUNCATION = 64
CAUSALITY_TOL = 1e-6


@dataclass(frozen=True)
class FunctionalSpec:
    """Coefficients a(0..N) of A xi = sum_k a(k) xi(-k).

    Infinite functionals are represented by a finite support plus
    ``tail_bound``, a user-declared bound on sum_{k>N} |a(k)| for the
    neglected coefficients.
    """

    a: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a))
        if a.ndim != 1 or a.size == 0:
            raise ValidationError("functional coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(a)):
            raise ValidationError("functional coefficients must be finite")
        if self.tail_bound < 0:
            raise ValidationError("tail_bound must be nonnegative")
        a = a.astype(complex if np.iscomplexobj(a) else float)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def N(self) -> int:
        return self.a.size - 1

    @property
    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.a)))

    @property
    def weighted_l2(self) -> float:
        """sum_k (k+1) |a(k)|^2, finite for every admissible functional."""
        return float(np.sum((np.arange(self.a.size) + 1) * np.abs(self.a) ** 2))

    def padded(self, n: int) -> np.ndarray:
        if self.a.size > n:
            raise ValidationError(f"functional with N={self.N} does not fit a truncation of {n}")
        out = np.zeros(n, dtype=self.a.dtype)
        out[: self.a.size] = self.a
        return out

    def transfer(self, G: int) -> np.ndarray:
        """A(e^{i lambda}) = sum_k a(k) e^{-i lambda k} on the grid."""
        return trig_series(self.a, G)


def as_functional(a) -> FunctionalSpec:
    return a if isinstance(a, FunctionalSpec) else FunctionalSpec(np.asarray(a))


@dataclass(frozen=True)
class FilterSolution:
    """Optimal filter for one functional.

    ``c`` is None for the factorized route, which never forms P^{-1} R a.
    """

    c: np.ndarray | None
    h: np.ndarray
    weights: np.ndarray
    mse: float
    functional: FunctionalSpec
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid_size(self) -> int:
        return self.h.size


def correction_series(c: np.ndarray, G: int) -> np.ndarray:
    """C(e^{i lambda}) = sum_k c(k) e^{i lambda (k+1)} on the grid."""
    return trig_series(c, G, power=1, offset=1)


def error_functional(h: np.ndarray, f: np.ndarray, g: np.ndarray, A: np.ndarray) -> float:
    """Delta(h; f, g) = (1/2pi) int |A-h|^2 f + |h|^2 g for any characteristic h."""
    return float(np.mean(np.abs(A - h) ** 2 * f + np.abs(h) ** 2 * g))


def _causality_defect(h: np.ndarray) -> float:
    full = lag_transform(h)
    G = h.size
    return float(np.max(np.abs(full[1 : G // 2]))) if G > 2 else 0.0


def _orthogonality_defect(h: np.ndarray, pair: SpectralPair, A: np.ndarray) -> float:
    full = lag_transform(A * pair.f - h * pair.total)
    G = h.size
    nonpositive = (-np.arange(G // 2)) % G
    return float(np.max(np.abs(full[nonpositive])))


def time_weights(solution, n: int | None = None, *, tol: float = CAUSALITY_TOL) -> tuple[np.ndarray, float]:
    """Weights w(0..n) of the estimate sum_k w(k) (xi(-k) + eta(-k)).

    Accepts a :class:`FilterSolution` or raw samples of h.  Returns the
    weights and the l2 tail mass sum_{k>n} |w(k)|^2 resolved by the grid.
    Raises :class:`ConsistencyError` when h has positive-lag content above
    ``tol`` (relative to max |w|), i.e. it is not a causal characteristic.
    """
    h = solution.h if isinstance(solution, FilterSolution) else np.asarray(solution)
    G = h.size
    if n is None:
        n = solution.weights.size - 1 if isinstance(solution, FilterSolution) else G // 2 - 1
    n = min(int(n), G // 2 - 1)
    full = lag_transform(h)
    w_all = full[(-np.arange(G // 2)) % G]
    if np.isrealobj(h) or np.allclose(w_all.imag, 0, atol=1e-14):
        w_all = w_all.real
    leak = float(np.max(np.abs(full[1 : G // 2]))) if G > 2 else 0.0
    if leak > tol * max(1.0, float(np.max(np.abs(w_all)))):
        raise ConsistencyError(f"characteristic has positive-lag content {leak:.3g}; not causal")
    tail = float(np.sum(np.abs(w_all[n + 1 :]) ** 2))
    return w_all[: n + 1].copy(), tail


def _bilinear_mse(c: np.ndarray, Ra: np.ndarray, Q: np.ndarray, a: np.ndarray) -> float:
    # <Ra, P^{-1}Ra> + the quadratic form (1/2pi) int |A|^2 fg/(f+g); for complex
    # coefficients the latter is a^H Q^T a in this index convention
    return float(np.real(np.vdot(c, Ra)) + np.real(np.vdot(a, Q.T @ a)))


def _finish(pair, a_spec, c, Ra, mse_value, method, L, cs=None, h=None, extra=None) -> FilterSolution:
    G = pair.G
    A = a_spec.transfer(G)
    if h is None:
        h = (A * pair.f - correction_series(c, G)) / pair.total
    weights, tail = time_weights(h, L, tol=np.inf)
    diag = {
        "truncation": L,
        "grid": G,
        "causality_defect": _causality_defect(h),
        "orthogonality_defect": _orthogonality_defect(h, pair, A),
        "weight_tail_mass": tail,
        "mse_integral": error_functional(h, pair.f, pair.g, A),
    }
    if cs is not None:
        diag.update({"residual": cs.residual, "condition": cs.condition, "solver": cs.method})
    if extra:
        diag.update(extra)
    return FilterSolution(
        None if c is None else np.array(c), h, weights, float(mse_value), a_spec, method, diag
    )


def solve_filter(f, g=None, a=(1.0,), L: int = DEFAULT_TRUNCATION, G: int | None = None) -> FilterSolution:
    """Optimal filter for A xi via c = P^{-1} R a on the L-truncation."""
    pair = as_pair(f, g, G)
    a_spec = as_functional(a)
    av = a_spec.padded(L)
    P = build_operator("P", pair, L=L)
    R = build_operator("R", pair, L=L)
    Q = build_operator("Q", pair, L=L)
    cs = solve_coefficients(P, R, av)
    Ra = R.entries @ av
    value = _bilinear_mse(cs.c, Ra, Q.entries, av)
    return _finish(pair, a_spec, cs.c, Ra, value, "direct", L, cs)


def solve_filter_finite(f, g=None, a=(1.0,), L: int = DEFAULT_TRUNCATION, G: int | None = None) -> FilterSolution:
    """Same contract as :func:`solve_filter` using R_N and Q_N for a = a(0..N)."""
    pair = as_pair(f, g, G)
    a_spec = as_functional(a)
    N = a_spec.N
    if N >= L:
        raise ValidationError(f"N={N} must be below the truncation L={L}")
    P = build_operator("P", pair, L=L)
    RN = build_operator("R_N", pair, L=L, N=N)
    QN = build_operator("Q_N", pair, L=L, N=N)
    cs = solve_coefficients(P, RN, a_spec.a)
    Ra = RN.entries @ a_spec.a
    value = _bilinear_mse(cs.c, Ra, QN.entries, a_spec.a)
    return _finish(pair, a_spec, cs.c, Ra, value, "finite", L, cs)


def mse(f, g=None, a=(1.0,), solution: FilterSolution | None = None, *, L: int | None = None, G: int | None = None) -> float:
    """<Ra, P^{-1}Ra> + <Qa, a> evaluated with the coefficients of ``solution``."""
    pair = as_pair(f, g, G)
    a_spec = as_functional(a)
    if solution is None:
        solution = solve_filter(pair, a=a_spec, L=L or DEFAULT_TRUNCATION)
    if solution.c is None:
        return solution.mse
    L = solution.c.size
    av = a_spec.padded(L)
    R = build_operator("R", pair, L=L)
    Q = build_operator("Q", pair, L=L)
    return _bilinear_mse(solution.c, R.entries @ av, Q.entries, av)


def estimate_point(f, g=None, p: int = 0, L: int = DEFAULT_TRUNCATION, G: int | None = None) -> FilterSolution:
    """Optimal estimate of the single value xi(p), p <= 0.

    Uses r_p = (R_{l+1,-p})_{l>=0} and Delta = <r_p, P^{-1} r_p> + Q_{-p,-p}.
    """
    p = int(p)
    if p > 0:
        raise ValidationError("only p <= 0 is supported: prediction of future values is out of scope")
    if -p >= L:
        raise ValidationError(f"|p|={-p} must be below the truncation L={L}")
    pair = as_pair(f, g, G)
    a = np.zeros(-p + 1)
    a[-p] = 1.0
    a_spec = FunctionalSpec(a)
    P = build_operator("P", pair, L=L)
    l = np.arange(L)
    r_p = pair.lag("s", l + 1 - p)
    V = invert_P(P)
    c = V.entries @ r_p
    value = float(np.real(np.vdot(c, r_p)) + np.real(pair.lag("q", 0)))
    G_ = pair.G
    lam_phase = trig_series(np.concatenate([np.zeros(-p), [1.0]]), G_)  # e^{i lambda p}
    h = (lam_phase * pair.f - correction_series(c, G_)) / pair.total
    return _finish(pair, a_spec, c, r_p, value, "point", L, h=h, extra={"p": p})


def smoothing(f, g=None, L: int = DEFAULT_TRUNCATION, G: int | None = None) -> FilterSolution:
    """Estimate of xi(0) from weights conj(r)(k) - (Y V r)_k and the g-series error formula."""
    pair = as_pair(f, g, G)
    P = build_operator("P", pair, L=L)
    V = invert_P(P).entries
    Y = build_operator("Y", pair, L=L).entries
    k = np.arange(L)
    r = pair.lag("s", k + 1)
    c = V @ r
    # one extra row of Y so that w(0..L) matches the other paths
    y_last = pair.lag("p", -(L + k + 1))
    weights = np.conj(pair.lag("s", np.arange(L + 1))) - np.concatenate([Y @ c, [y_last @ c]])
    # sum_{l in Z} r(l) g(-l) over every lag the grid resolves
    Gn = pair.G
    lags = np.arange(Gn)
    noise_term = np.sum(pair.s * pair.g_coeffs[(-lags) % Gn])
    value = float(np.real(np.sum(np.conj(V) * np.outer(r, np.conj(r)))) + np.real(noise_term))
    if np.allclose(np.imag(weights), 0, atol=1e-14):
        weights = np.real(weights)
    h = trig_series(weights, Gn)
    a_spec = FunctionalSpec(np.array([1.0]))
    sol = _finish(pair, a_spec, c, r, value, "smoothing", L, h=h)
    return FilterSolution(sol.c, sol.h, weights, sol.mse, a_spec, "smoothing", sol.diagnostics)


def solve_filter_factorized(
    f, g=None, a=(1.0,), L: int = DEFAULT_TRUNCATION, G: int | None = None, *, factor_length: int | None = None
) -> FilterSolution:
    """Characteristic and error from canonical factors of 1/(f+g), f+g and f.

    h = psi(e^{-i lambda}) * sum_m (C conj(psi))_m e^{-i lambda m}, where
    (C)_{k,j} = c~(k+j) with c~ = conj(G) a and G = Phi' conj(Phi); the
    error is <Ga, a> - <C conj(psi), C conj(psi)>.
    """
    pair = as_pair(f, g, G)
    a_spec = as_functional(a)
    Lf = int(factor_length or max(L, DEFAULT_FACTOR_LENGTH))
    Gn = pair.G
    psi = spectral_factorize(1.0 / pair.total, Lf, target="1/(f+g)")
    theta = spectral_factorize(pair.total, Lf, target="f+g")
    phi = spectral_factorize(pair.f, Lf, target="f")
    av = a_spec.a
    y = np.convolve(phi.coeffs, av)  # Phi a
    # conj(G) a = Phi^H Phi a:  c~(n) = sum_m conj(phi(m)) y(n+m)
    ctilde = np.correlate(y, phi.coeffs, mode="full")[phi.coeffs.size - 1 :]
    # (C conj(psi))_m = sum_l conj(psi(l)) c~(m+l)
    e = np.correlate(ctilde, psi.coeffs, mode="full")[psi.coeffs.size - 1 :]
    energy = float(np.real(np.vdot(y, y)))
    correction = float(np.real(np.vdot(e, e)))
    h = psi.transfer(Gn) * trig_series(e, Gn)
    n = av.size
    Gop = gram_from_factor(phi, n, kind="G").entries
    Psi = triangular_operator(psi, L).entries
    Theta = triangular_operator(theta, L).entries
    extra = {
        "energy_term": energy,
        "correction_term": correction,
        "energy_term_from_G": float(np.real(np.vdot(av, Gop @ av))),
        "psi_theta_defect": float(np.max(np.abs(Psi @ Theta - np.eye(L)))),
        "factor_residuals": {"psi": psi.residual, "theta": theta.residual, "phi": phi.residual},
    }
    return _finish(pair, a_spec, None, None, energy - correction, "factorized", L, h=h, extra=extra)


def factors_for(f, g=None, L: int = DEFAULT_FACTOR_LENGTH, G: int | None = None) -> dict[str, FactorCoeffs]:
    """psi, theta, phi and upsilon = psi * phi for a density pair."""
    from .factorization import factor_product

    pair = as_pair(f, g, G)
    psi = spectral_factorize(1.0 / pair.total, L, target="1/(f+g)")
    theta = spectral_factorize(pair.total, L, target="f+g")
    phi = spectral_factorize(pair.f, L, target="f")
    ups = factor_product(psi, phi, target=pair.f / pair.total)
    return {"psi": psi, "theta": theta, "phi": phi, "upsilon": ups}
