"""Least favorable densities and minimax-robust characteristics.

For a fixed characteristic h the error Delta(h; f, g) is linear in (f, g)
with pointwise weights h_f^2 = |A-h|^2 and h_g^2 = |h|^2.  The optimal error
Delta(f, g) = min_h Delta(h; f, g) is therefore concave and nondecreasing in
each density, and the least favorable pair of a convex class is a KKT point
of that concave program.  The solvers below are damped fixed-point
iterations on the stationarity equations of each class; results are
certified a posteriori by :func:`verify_saddle_point` and the grid oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, MinimalityError, ValidationError
from .filtering import (
    DEFAULT_TRUNCATION,
    FilterSolution,
    FunctionalSpec,
    as_functional,
    correction_series,
    error_functional,
    solve_filter,
    time_weights,
)
from .operators import SpectralPair
from .spectral import evaluate_density, frequency_grid, lag_transform, trig_series

DEFAULT_MINIMAX_GRID = 1024
DAMPING = 0.5
TOL = 1e-8
MAX_ITER = 500


def _samples(d, G: int) -> np.ndarray:
    if np.isscalar(d):
        return np.full(G, float(d))
    return evaluate_density(d, G)


def _cell_reduce(x: np.ndarray, n: int, how) -> np.ndarray:
    if x.size % n:
        raise ValidationError(f"grid of {x.size} is not a multiple of {n} nodes")
    return how(x.reshape(n, -1), axis=1)


def _random_shape(rng: np.random.Generator, G: int) -> np.ndarray:
    """A positive random profile: smooth log-trig, a narrow spike, or flat."""
    lam = frequency_grid(G)
    kind = rng.integers(3)
    if kind == 0:
        K = int(rng.integers(1, 6))
        coef = rng.normal(size=K) + 1j * rng.normal(size=K)
        logs = np.real(np.exp(1j * np.outer(lam, np.arange(1, K + 1))) @ coef)
        x = np.exp(logs / max(1.0, np.max(np.abs(logs))) * rng.uniform(0.5, 3.0))
    elif kind == 1:
        centre = rng.uniform(-np.pi, np.pi)
        width = rng.uniform(0.05, 0.5)
        dist = np.angle(np.exp(1j * (lam - centre)))
        x = np.exp(-0.5 * (dist / width) ** 2) + rng.uniform(1e-3, 0.05)
    else:
        x = np.ones(G)
    # even profiles keep h_f, h_g real-symmetric problems symmetric
    return 0.5 * (x + x[(-np.arange(G)) % G]) if rng.random() < 0.5 else x


@dataclass(frozen=True)
class PowerPair:
    """(1/2pi) int f <= P1 and (1/2pi) int g <= P2."""

    P1: float
    P2: float
    variant: str = field(default="power", init=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not (np.isfinite(self.P1) and np.isfinite(self.P2)) or self.P1 < 0 or self.P2 < 0:
            raise ValidationError("power bounds must be finite and nonnegative")
        if self.P1 + self.P2 <= 0:
            raise ValidationError("at least one power bound must be positive")

    def is_admissible(self, f, g, tol: float = TOL) -> bool:
        f, g = np.asarray(f), np.asarray(g)
        return bool(
            np.all(f >= -tol)
            and np.all(g >= -tol)
            and np.mean(f) <= self.P1 + tol * max(1.0, self.P1)
            and np.mean(g) <= self.P2 + tol * max(1.0, self.P2)
        )

    def project(self, f, g):
        """Rescale both densities onto the binding power constraints."""
        f = np.maximum(np.asarray(f, dtype=float), 0)
        g = np.maximum(np.asarray(g, dtype=float), 0)
        mf, mg = np.mean(f), np.mean(g)
        f = f * (self.P1 / mf) if mf > 0 else np.full_like(f, self.P1)
        g = g * (self.P2 / mg) if mg > 0 else np.full_like(g, self.P2)
        return f, g

    def sample(self, rng: np.random.Generator, G: int):
        f, g = self.project(_random_shape(rng, G), _random_shape(rng, G))
        return f * rng.choice([1.0, rng.uniform(0.5, 1.0)]), g * rng.choice([1.0, rng.uniform(0.5, 1.0)])

    def restrict(self, n_nodes: int) -> "PowerPair":
        return self


@dataclass(frozen=True)
class JointMinimal:
    """(1/2pi) int 1/(f+g) >= P0."""

    P0: float
    variant: str = field(default="joint", init=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not np.isfinite(self.P0) or self.P0 <= 0:
            raise ValidationError("P0 must be positive and finite")

    def is_admissible(self, f, g, tol: float = TOL) -> bool:
        f, g = np.asarray(f), np.asarray(g)
        if np.any(f < -tol) or np.any(g < -tol):
            return False
        s = f + g
        if np.any(s <= 0):
            return True  # 1/(f+g) not integrable: the constraint holds trivially
        return bool(np.mean(1.0 / s) >= self.P0 * (1 - tol))

    def project(self, f, g):
        """Joint rescaling onto the boundary (1/2pi) int 1/(f+g) = P0."""
        f = np.maximum(np.asarray(f, dtype=float), 0)
        g = np.maximum(np.asarray(g, dtype=float), 0)
        t = np.mean(1.0 / (f + g)) / self.P0
        return f * t, g * t

    def sample(self, rng: np.random.Generator, G: int):
        return self.project(_random_shape(rng, G), _random_shape(rng, G))

    def restrict(self, n_nodes: int) -> "JointMinimal":
        return self


@dataclass(frozen=True)
class BandContamination:
    """v <= f <= u with (1/2pi) int f <= P1; g = (1-eps) g1 + eps w with (1/2pi) int g <= P2."""

    v: np.ndarray
    u: np.ndarray
    P1: float
    g1: np.ndarray
    eps: float
    P2: float
    variant: str = field(default="band", init=False)

    def __post_init__(self):
        for name in ("v", "u", "g1"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.validate()

    @classmethod
    def from_densities(cls, v, u, P1, g1, eps, P2, G: int = DEFAULT_MINIMAX_GRID) -> "BandContamination":
        return cls(_samples(v, G), _samples(u, G), float(P1), _samples(g1, G), float(eps), float(P2))

    @property
    def floor(self) -> np.ndarray:
        return (1.0 - self.eps) * self.g1

    @property
    def G(self) -> int:
        return self.v.size

    def validate(self) -> None:
        v, u, g1 = self.v, self.u, self.g1
        if v.ndim != 1 or v.shape != u.shape or v.shape != g1.shape:
            raise ValidationError("v, u and g1 must be samples on one grid")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(u)) and np.all(np.isfinite(g1))):
            raise ValidationError("band bounds must be finite")
        if np.any(v < 0) or np.any(g1 < 0):
            raise ValidationError("v and g1 must be nonnegative")
        if np.any(v > u):
            raise ValidationError("the band requires v <= u pointwise")
        if not 0.0 <= self.eps <= 1.0:
            raise ValidationError("eps must lie in [0, 1]")
        if self.P1 <= 0 or self.P2 < 0:
            raise ValidationError("P1 must be positive and P2 nonnegative")
        if np.mean(v) > self.P1 * (1 + 1e-12):
            raise ValidationError(f"empty band class: mean(v) = {np.mean(v):.6g} exceeds P1 = {self.P1:.6g}")
        if np.mean(self.floor) > self.P2 * (1 + 1e-12):
            raise ValidationError(
                f"empty contamination class: mean((1-eps) g1) = {np.mean(self.floor):.6g} exceeds P2 = {self.P2:.6g}"
            )

    def is_admissible(self, f, g, tol: float = TOL) -> bool:
        f, g = np.asarray(f), np.asarray(g)
        scale = max(1.0, float(np.max(self.u)))
        return bool(
            np.all(f >= self.v - tol * scale)
            and np.all(f <= self.u + tol * scale)
            and np.mean(f) <= self.P1 + tol * max(1.0, self.P1)
            and np.all(g >= self.floor - tol * max(1.0, float(np.max(self.floor, initial=0))))
            and np.mean(g) <= self.P2 + tol * max(1.0, self.P2)
        )

    def project_f(self, f) -> np.ndarray:
        f = np.maximum(np.asarray(f, dtype=float), 0)
        v, u = self.v, self.u
        if np.mean(u) <= self.P1:
            return u.copy()
        if np.mean(v) >= self.P1:
            return v.copy()
        fill = lambda t: np.mean(np.clip(t * f, v, u)) - self.P1
        hi = 1.0
        while fill(hi) < 0 and hi < 1e300:
            hi *= 2.0
        if fill(hi) < 0:
            return np.clip(hi * f, v, u)
        t = brentq(fill, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        return np.clip(t * f, v, u)

    def project_g(self, g) -> np.ndarray:
        g = np.maximum(np.asarray(g, dtype=float), 0)
        floor = self.floor
        if np.mean(floor) >= self.P2 * (1 - 1e-15):
            return floor.copy()
        fill = lambda s: np.mean(np.maximum(floor, s * g)) - self.P2
        hi = 1.0
        while fill(hi) < 0 and hi < 1e300:
            hi *= 2.0
        s = brentq(fill, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        return np.maximum(floor, s * g)

    def project(self, f, g):
        return self.project_f(f), self.project_g(g)

    def sample(self, rng: np.random.Generator, G: int):
        if G != self.G:
            raise ValidationError(f"class lives on a grid of {self.G}, not {G}")
        f = self.project_f(_random_shape(rng, G))
        # random point of the contamination set: floor plus eps-mass of a random density
        w = _random_shape(rng, G)
        budget = self.P2 - np.mean(self.floor)
        g = self.floor + w * (budget / np.mean(w)) * rng.choice([1.0, rng.uniform(0.3, 1.0)])
        return f, g

    def restrict(self, n_nodes: int) -> "BandContamination":
        """Cellwise-conservative bounds so piecewise-constant densities stay admissible."""
        rep = self.G // n_nodes
        pinned = np.repeat(_cell_reduce(self.u - self.v, n_nodes, np.max) <= 0, rep)
        # cells where the band is a single function keep their fine values
        v = np.where(pinned, self.v, np.repeat(_cell_reduce(self.v, n_nodes, np.max), rep))
        u = np.where(pinned, self.u, np.repeat(_cell_reduce(self.u, n_nodes, np.min), rep))
        g1 = np.repeat(_cell_reduce(self.g1, n_nodes, np.max), rep)
        if np.any(v > u):
            raise ValidationError("band too narrow for a piecewise-constant restriction at this node count")
        return BandContamination(v, u, self.P1, g1, self.eps, self.P2)


DensityClass = Union[PowerPair, JointMinimal, BandContamination]


class HComponents(NamedTuple):
    h_f: np.ndarray
    h_g: np.ndarray
    max_f: float
    max_g: float


def h_components(f, g=None, solution: FilterSolution | None = None, *, a=(1.0,), L: int = DEFAULT_TRUNCATION) -> HComponents:
    """h_f = |A g + C|/(f+g) = |A - h| and h_g = |A f - C|/(f+g) = |h| on the grid."""
    pair = f if isinstance(f, SpectralPair) else SpectralPair(
        np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    )
    if solution is None:
        solution = solve_filter(pair, a=a, L=L)
    A = solution.functional.transfer(pair.G)
    if solution.c is not None:
        C = correction_series(solution.c, pair.G)
        hf = np.abs(A * pair.g + C) / pair.total
        hg = np.abs(A * pair.f - C) / pair.total
    else:
        hf = np.abs(A - solution.h)
        hg = np.abs(solution.h)
    if not (np.all(np.isfinite(hf)) and np.all(np.isfinite(hg))):
        raise MinimalityError("h_f or h_g is unbounded on the grid")
    return HComponents(hf, hg, float(np.max(hf)), float(np.max(hg)))


@dataclass(frozen=True)
class MinimaxSolution:
    """Least favorable pair, multipliers and the robust characteristic for one class."""

    f0: np.ndarray
    g0: np.ndarray
    h0: np.ndarray
    delta0: float
    multipliers: dict
    residuals: dict
    iterations: int
    klass: object
    functional: FunctionalSpec
    filter: FilterSolution | None = None

    @property
    def grid_size(self) -> int:
        return self.f0.size

    def error_at(self, f, g) -> float:
        """Delta(h0; f, g) for another pair of densities on the same grid."""
        return error_functional(self.h0, np.asarray(f), np.asarray(g), self.functional.transfer(self.f0.size))

    def with_characteristic(self, h: np.ndarray) -> "MinimaxSolution":
        """Copy carrying a different characteristic (used for negative controls)."""
        h = np.asarray(h)
        delta = error_functional(h, self.f0, self.g0, self.functional.transfer(h.size))
        return MinimaxSolution(
            self.f0, self.g0, h, delta, self.multipliers, self.residuals, self.iterations, self.klass, self.functional, None
        )


def _weighted_level(h2: np.ndarray, d: np.ndarray) -> float:
    m = np.mean(d)
    return float(np.mean(h2 * d) / m) if m > 0 else float(np.max(h2))


def _finalize(f, g, a_spec, L, klass, multipliers, residuals, iterations, h0=None) -> MinimaxSolution:
    """Filter for (f, g); the robust characteristic is its causal part."""
    sol = solve_filter(SpectralPair(f, g), a=a_spec, L=L)
    G = sol.h.size
    if h0 is None:
        weights, _ = time_weights(sol.h, G // 2 - 1, tol=np.inf)
        h0 = trig_series(weights, G)
    A = a_spec.transfer(G)
    delta0 = error_functional(h0, f, g, A)
    residuals = dict(residuals)
    residuals["mse_form_gap"] = abs(sol.mse - delta0)
    residuals["causality_defect"] = sol.diagnostics["causality_defect"]
    return MinimaxSolution(
        np.array(f), np.array(g), h0, delta0, multipliers, residuals, iterations, klass, a_spec, sol
    )


def _fixed_point(step, x0, *, project, tol, max_iter, damping, memory, what):
    """Iterate x <- step(x) with Anderson mixing (``memory`` > 0) or plain damping.

    Every iterate is passed through ``project`` so it stays in the class.
    Returns (x, residual, iterations) where x = step(previous iterate).
    """
    x = x0
    xs, rs = [], []
    res = np.inf
    for it in range(1, max_iter + 1):
        tx = step(x)
        r = tx - x
        res = float(np.max(np.abs(r)) / max(float(np.max(np.abs(tx))), 1e-300))
        if res <= tol:
            return tx, res, it
        if memory > 0:
            xs.append(tx)
            rs.append(r)
            xs, rs = xs[-memory - 1 :], rs[-memory - 1 :]
            if len(rs) > 1:
                dR = np.diff(np.array(rs), axis=0).T
                dX = np.diff(np.array(xs), axis=0).T
                gamma = np.linalg.lstsq(dR, r, rcond=None)[0]
                tx = tx - dX @ gamma
            x = project(tx)
        else:
            x = project(x + damping * r)
    raise ConvergenceError(f"{what} iteration stopped after {max_iter} steps with residual {res:.3g}", res, max_iter)


def least_favorable_power(
    klass: PowerPair,
    a=(1.0,),
    *,
    G: int = DEFAULT_MINIMAX_GRID,
    L: int = DEFAULT_TRUNCATION,
    concentration: float = 1e-3,
    mixing: float = 1e-3,
) -> MinimaxSolution:
    """Least favorable pair for the power class.

    For every admissible pair, Delta(f, g) <= Delta(kappa A; f, g) <=
    B = max|A|^2 P1 P2/(P1+P2) with kappa = P1/(P1+P2), so kappa A is the
    minimax-robust characteristic.  When |A| is constant on the circle the
    constant pair (P1, P2) attains B and solves |A g0 + C| = alpha1 (f0+g0),
    |A f0 - C| = alpha2 (f0+g0) with C = 0.  Otherwise B is approached only
    by pairs concentrating on the maximizers of |A|, which violate the
    minimality condition in the limit: the supremum is not attained.  The
    solution then carries the proportional near-maximizer f0 = P1 w,
    g0 = P2 w, with w concentrated on {|A|^2 >= max - concentration*(max-min)}
    and a uniform ``mixing`` share, and reports B and the gap.
    """
    a_spec = as_functional(a)
    A2 = np.abs(a_spec.transfer(G)) ** 2
    P1, P2 = klass.P1, klass.P2
    if P1 == 0 or P2 == 0:
        # one density vanishes: the error is zero for every admissible partner
        f = np.full(G, P1)
        g = np.full(G, P2)
        return _finalize(f, g, a_spec, L, klass, {"alpha1": 0.0, "alpha2": 0.0}, {"supremum": 0.0, "supremum_gap": 0.0, "attained": True}, 0)
    top, bottom = float(np.max(A2)), float(np.min(A2))
    kappa = P1 / (P1 + P2)
    bound = top * P1 * P2 / (P1 + P2)
    flat = top - bottom <= 1e-12 * top
    if flat:
        w = np.ones(G)
    else:
        band = A2 >= top - concentration * (top - bottom)
        w = (1 - mixing) * band / np.mean(band) + mixing
    f, g = P1 * w, P2 * w
    h0 = kappa * a_spec.transfer(G)
    mult = {"alpha1": float((1 - kappa) * np.sqrt(top)), "alpha2": float(kappa * np.sqrt(top))}
    out = _finalize(f, g, a_spec, L, klass, mult, {"supremum": bound, "attained": bool(flat)}, 0, h0=h0)
    out.residuals["supremum_gap"] = float(bound - out.delta0)
    out.residuals["equation"] = power_equation_residual(out)
    return out


def power_equation_residual(solution: MinimaxSolution) -> float:
    """max |h_f - alpha1| (f0+g0) and |h_g - alpha2| (f0+g0) over the support, i.e. the power-class equation residual."""
    hc = h_components(SpectralPair(solution.f0, solution.g0), solution=solution.filter)
    s = solution.f0 + solution.g0
    r1 = np.abs(hc.h_f - solution.multipliers["alpha1"]) * s
    r2 = np.abs(hc.h_g - solution.multipliers["alpha2"]) * s
    on_f = solution.f0 > 0
    on_g = solution.g0 > 0
    return float(max(np.max(r1[on_f], initial=0.0), np.max(r2[on_g], initial=0.0)))


def _calibrate(build, target: float, lo: float, hi: float, increasing: bool) -> float:
    """Root of mean(build(t)) = target for a monotone family, bracketing outward."""
    fn = lambda t: np.mean(build(t)) - target
    while (fn(hi) < 0) == increasing and hi < 1e300:
        hi *= 2.0
    if not increasing:
        while fn(lo) < 0 and lo > 1e-300:
            lo /= 2.0
    return brentq(fn, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def least_favorable_given_f(
    f,
    P2: float,
    a=(1.0,),
    *,
    eps: float | None = None,
    g1=None,
    G: int = DEFAULT_MINIMAX_GRID,
    L: int = DEFAULT_TRUNCATION,
    damping: float = DAMPING,
    memory: int = 5,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> MinimaxSolution:
    """Least favorable noise density for a known signal density.

    Without ``g1``: g0 = max{0, |A f - C|/alpha2 - f} with (1/2pi) int g0 = P2.
    With ``g1`` and ``eps``: g0 = max{(1-eps) g1, alpha2 |A f - C| - f}.
    C is recomputed from the current g0 until the max-form is self-consistent.
    """
    if P2 < 0 or not np.isfinite(P2):
        raise ValidationError("P2 must be nonnegative")
    a_spec = as_functional(a)
    fs = _samples(f, G)
    G = fs.size
    contaminated = g1 is not None
    if contaminated:
        if eps is None or not 0 <= eps <= 1:
            raise ValidationError("eps in [0, 1] is required together with g1")
        floor = (1.0 - eps) * _samples(g1, G)
        if np.mean(floor) > P2 * (1 + 1e-12):
            raise ValidationError("empty contamination class: mean((1-eps) g1) exceeds P2")
    else:
        floor = np.zeros(G)
    klass = PowerPair(float(np.mean(fs)), P2)
    if P2 == 0 or np.mean(floor) >= P2 * (1 - 1e-15):
        g = floor.copy()
        mult = {"alpha2": float("nan")}
        return _finalize(fs, g, a_spec, L, klass, mult, {"iteration": 0.0, "equation": 0.0, "power": 0.0}, 0)
    A = a_spec.transfer(G)

    def max_form(t, m):
        if contaminated:
            return np.maximum(floor, t * m - fs)
        return np.maximum(0.0, m / t - fs)

    def calibrate(m):
        top = float(np.max(m))
        if contaminated:
            return _calibrate(lambda t: max_form(t, m), P2, 0.0, 1.0, True)
        return _calibrate(lambda t: max_form(t, m), P2, 1e-3 * top, top, False)

    def modulus(g):
        sol = solve_filter(SpectralPair(fs, g), a=a_spec, L=L)
        return np.abs(A * fs - correction_series(sol.c, G))

    def step(g):
        m = modulus(g)
        return max_form(calibrate(m), m)

    def project(g):
        g = np.maximum(g, floor)
        excess = np.mean(g - floor)
        return floor + (g - floor) * ((P2 - np.mean(floor)) / excess) if excess > 0 else g

    m0 = np.abs(A * fs)
    g, res, it = _fixed_point(
        step, max_form(calibrate(m0), m0), project=project, tol=tol, max_iter=max_iter,
        damping=damping, memory=memory, what="max-form",
    )
    # g is an exact member of the max-form family; alpha2 is recalibrated on its own C
    out = _finalize(fs, g, a_spec, L, klass, {}, {"iteration": res}, it)
    m = np.abs(A * fs - correction_series(out.filter.c, G))
    out.multipliers["alpha2"] = float(calibrate(m))
    out.residuals.update(given_f_residuals(out, fs, floor=floor if contaminated else None))
    return out


def given_f_residuals(solution: MinimaxSolution, f, *, floor=None) -> dict:
    """Self-consistency of the max-form with C recomputed from g0, and the power gap.

    ``floor`` = (1-eps) g1 selects the contaminated form alpha2 |A f - C| - f;
    without it the form |A f - C|/alpha2 - f is checked.
    """
    fs = np.asarray(f)
    G = fs.size
    A = solution.functional.transfer(G)
    m = np.abs(A * fs - correction_series(solution.filter.c, G))
    alpha = solution.multipliers["alpha2"]
    if floor is not None:
        target = np.maximum(np.asarray(floor), alpha * m - fs)
    else:
        target = np.maximum(0.0, m / alpha - fs)
    scale = max(float(np.max(solution.g0)), 1e-300)
    return {
        "equation": float(np.max(np.abs(target - solution.g0)) / scale),
        "power": float(abs(np.mean(solution.g0) - solution.klass.P2)),
    }


def _positive_root(qa: np.ndarray, qb: np.ndarray, qc: np.ndarray) -> np.ndarray:
    """Largest nonnegative root of qa x^2 + qb x + qc = 0, or 0 where none exists."""
    disc = qb * qb - 4 * qa * qc
    ok = (disc >= 0) & (qa > 0)
    root = np.zeros_like(qa)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    # numerically stable form of (-qb + sq)/(2 qa)
    big = np.where(qb <= 0, (-qb + sq) / np.where(ok, 2 * qa, 1.0), 2 * (-qc) / np.where(qb + sq > 0, qb + sq, 1.0))
    root[ok] = np.maximum(big[ok], 0.0)
    return root


def least_favorable_joint(
    klass: JointMinimal,
    a=(1.0,),
    *,
    G: int = DEFAULT_MINIMAX_GRID,
    L: int = DEFAULT_TRUNCATION,
    damping: float = DAMPING,
    memory: int = 5,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    coefficient_terms: int | None = None,
) -> MinimaxSolution:
    """Stationary pair of the joint class from the constant-modulus conditions.

    Solves |A g + C| = beta and |A f - C| = beta pointwise (one quadratic in
    each density), fixes beta so that (1/2pi) int 1/(f+g) = P0, recomputes C
    and repeats.  The Lagrangian of this class carries a single multiplier,
    so beta1 = beta2.  Delta is not bounded above on this class (see
    :func:`joint_unbounded_pair`), so the pair returned is a stationary
    point of the constrained problem, not a maximizer.
    """
    a_spec = as_functional(a)
    A = a_spec.transfer(G)
    absA2 = np.abs(A) ** 2
    if np.any(absA2 < 1e-14 * np.max(absA2)):
        raise ValidationError("A(e^{i lambda}) vanishes on the grid; the modulus conditions cannot be solved")
    beta0 = 1.0 / (2 * klass.P0)

    def pair_for(beta, C):
        re = np.real(A * np.conj(C))
        c2 = np.abs(C) ** 2 - beta**2
        return _positive_root(absA2, -2 * re, c2), _positive_root(absA2, 2 * re, c2)

    def gap(beta, C):
        ff, gg = pair_for(beta, C)
        s = ff + gg
        return 1e300 if np.any(s <= 0) else float(np.mean(1.0 / s)) - klass.P0

    def solve_beta(C):
        lo = float(np.max(np.abs(C))) * (1 + 1e-12) + 1e-300
        hi = max(2 * lo, 4 * beta0)
        while gap(hi, C) > 0:
            hi *= 2.0
        return brentq(lambda b: gap(b, C), lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    def correction(x):
        sol = solve_filter(SpectralPair(x[:G], x[G:]), a=a_spec, L=L)
        return correction_series(sol.c, G)

    def step(x):
        C = correction(x)
        return np.concatenate(pair_for(solve_beta(C), C))

    def project(x):
        f, g = klass.project(np.maximum(x[:G], 0), np.maximum(x[G:], 0))
        return np.concatenate([f, g])

    start = np.full(G, beta0 / np.sqrt(np.mean(absA2)))
    x, res, it = _fixed_point(
        step, project(np.concatenate([start, start])), project=project, tol=tol,
        max_iter=max_iter, damping=damping, memory=memory, what="joint-class",
    )
    f, g = x[:G], x[G:]
    beta = solve_beta(correction(x))
    out = _finalize(f, g, a_spec, L, klass, {"beta1": float(beta), "beta2": float(beta)}, {"iteration": res}, it)
    out.residuals.update(joint_residuals(out, coefficient_terms=coefficient_terms))
    return out


def joint_unbounded_pair(klass: JointMinimal, level: float, G: int = DEFAULT_MINIMAX_GRID, floor: float = 1e-3):
    """An admissible pair of the joint class with Delta growing linearly in ``level``.

    f = g = level on half the circle and ``floor`` elsewhere; the small values
    keep (1/2pi) int 1/(f+g) >= P0 while the large ones carry unbounded power.
    """
    lam = frequency_grid(G)
    high = np.abs(lam) < np.pi / 2
    if np.mean(np.where(high, 0.0, 1.0 / (2 * floor))) < klass.P0:
        raise ValidationError("floor too large to satisfy the constraint")
    f = np.where(high, float(level), floor)
    return f, f.copy()


def joint_residuals(solution: MinimaxSolution, *, coefficient_terms: int | None = None) -> dict:
    """Modulus conditions in grid form and in the coefficient (operator) form.

    With (f0)_0 = f0(0)/2, (f0)_j = f0(j), the coefficient form reads
    |sum_k ((A+)' f0 + A f0)_k e^{-i lambda k} + sum_k ((A+ f0)_{k+1} - c(k)) e^{i lambda (k+1)}|^2 = beta^2,
    The reported ``coefficient_form_literal`` evaluates the printed variant instead (see :func:`_coefficient_series`).
    """
    f0, g0 = solution.f0, solution.g0
    G = f0.size
    a = solution.functional.a
    A = solution.functional.transfer(G)
    c = solution.filter.c
    C = correction_series(c, G)
    b1, b2 = solution.multipliers["beta1"], solution.multipliers["beta2"]
    scale = max(b1, b2) ** 2
    modulus = max(np.max(np.abs(np.abs(A * g0 + C) ** 2 - b1**2)), np.max(np.abs(np.abs(A * f0 - C) ** 2 - b2**2))) / scale
    out = {"modulus": float(modulus), "constraint": float(abs(np.mean(1.0 / (f0 + g0)) - solution.klass.P0))}
    even = lambda d: np.allclose(d, d[(-np.arange(G)) % G], rtol=0, atol=1e-12 * float(np.max(d)))
    if np.iscomplexobj(a) or not (even(f0) and even(g0)):
        out.update({"coefficient_form": float("nan"), "coefficient_form_literal": float("nan")})
        return out
    K = int(coefficient_terms or G // 2 - a.size - 2)
    for name, literal in (("coefficient_form", False), ("coefficient_form_literal", True)):
        worst = 0.0
        for dens, sign, beta in ((g0, 1.0, b1), (f0, -1.0, b2)):
            lhs = _coefficient_series(a, np.real(lag_transform(dens)), c, K, G, sign, literal)
            worst = max(worst, float(np.max(np.abs(np.abs(lhs) ** 2 - beta**2))) / scale)
        out[name] = worst
    return out


def _coefficient_series(a, lags, c, K, G, sign, literal):
    """Coefficient form of A d + sign*C for a real even density d with lag coefficients ``lags``.

    The positive-power part of A d is sum_{k>=0} (A+ d)_{k+1} e^{i lambda (k+1)}, with the
    same sign for both densities.  ``literal`` instead uses (A+ d)_k and attaches the sign
    of C to it, as in the printed operator equations.
    """
    N = a.size - 1
    v = lags[: K + N + 2].copy()
    v[0] /= 2  # halved zeroth coefficient
    # ((A+)' v)_k = sum_{j<=k} a(k-j) v_j ; (A v)_k = sum_j a(k+j) v_j ; (A+ v)_k = sum_j a(j) v_{j+k}
    minus = np.convolve(a, v[: K + 1])[: K + 1].astype(complex)
    minus[: N + 1] += np.array([np.dot(a[k:], v[: N + 1 - k]) for k in range(N + 1)])
    aplus = np.array([np.dot(a, v[k : k + N + 1]) for k in range(K + 2)])
    cc = np.zeros(K + 1, dtype=complex)
    cc[: min(c.size, K + 1)] = c[: K + 1]
    plus = sign * (aplus[: K + 1] + cc) if literal else aplus[1 : K + 2] + sign * cc
    return trig_series(minus, G) + trig_series(plus, G, power=1, offset=1)


def least_favorable_band_eps(
    klass: BandContamination,
    a=(1.0,),
    *,
    L: int = DEFAULT_TRUNCATION,
    f_fixed=None,
    method: str = "maxform",
    damping: float = DAMPING,
    memory: int = 5,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> MinimaxSolution:
    """Least favorable pair for the band x contamination class.

    With ``f_fixed`` only g is optimized through the closed form
    g0 = max{(1-eps) g1, alpha2 |A f - C| - f}.  Otherwise the default
    ``method="maxform"`` iterates the same form for both densities,

        f <- clip(alpha1 |A g + C| - g, v, u),   g <- max((1-eps) g1, alpha2 |A f - C| - f),

    with alpha1, alpha2 fixed by the power bounds and C recomputed each step.
    ``method="multiplicative"`` instead rescales f by (h_f^2/mu1)^damping and
    projects; it reaches the same point but slowly once f sits on the bounds.
    The multiplier functions gamma1, gamma2 and phi are recovered from the
    active sets afterwards.
    """
    if method not in ("maxform", "multiplicative"):
        raise ValidationError(f"unknown band method {method!r}")
    a_spec = as_functional(a)
    G = klass.G
    if f_fixed is not None:
        return least_favorable_given_f(
            _samples(f_fixed, G), klass.P2, a_spec, eps=klass.eps, g1=klass.g1,
            G=G, L=L, tol=tol, max_iter=max_iter, damping=damping, memory=memory,
        )
    A = a_spec.transfer(G)
    v, u, floor = klass.v, klass.u, klass.floor
    f_frozen = bool(np.all(u - v <= 0) or np.mean(u) <= klass.P1)
    g_frozen = bool(np.mean(floor) >= klass.P2 * (1 - 1e-15))
    # start from the interior: the band midpoint and a uniform contamination
    f, g = klass.project(0.5 * (v + u) + 1e-12, np.ones(G))
    if f_frozen:
        f = u.copy()
    if g_frozen:
        g = floor.copy()

    def f_form(t, m, g_):
        return np.clip(t * m - g_, v, u)

    def g_form(t, m, f_):
        return np.maximum(floor, t * m - f_)

    def step(x):
        f_, g_ = x[:G], x[G:]
        sol = solve_filter(SpectralPair(f_, g_), a=a_spec, L=L)
        C = correction_series(sol.c, G)
        if not f_frozen:
            mf = np.abs(A * g_ + C)
            f_ = f_form(_calibrate(lambda t: f_form(t, mf, g_), klass.P1, 0.0, 1.0, True), mf, g_)
        if not g_frozen:
            mg = np.abs(A * x[:G] - C)
            g_ = g_form(_calibrate(lambda t: g_form(t, mg, x[:G]), klass.P2, 0.0, 1.0, True), mg, x[:G])
        return np.concatenate([f_, g_])

    def multiplicative_step(x):
        f_, g_ = x[:G], x[G:]
        hc = h_components(SpectralPair(f_, g_), a=a_spec, L=L)
        hf2, hg2 = hc.h_f**2, hc.h_g**2
        if not f_frozen:
            mu1 = _weighted_level(hf2, f_)
            f_ = klass.project_f(f_ * (hf2 / mu1) ** damping) if mu1 > 0 else f_
        if not g_frozen:
            mu2 = _weighted_level(hg2, g_)
            g_ = klass.project_g(g_ * (hg2 / mu2) ** damping) if mu2 > 0 else g_
        return np.concatenate([f_, g_])

    def project(x):
        return np.concatenate(klass.project(x[:G], x[G:]))

    res, it = 0.0, 0
    if not (f_frozen and g_frozen):
        if method == "maxform":
            x, res, it = _fixed_point(
                step, np.concatenate([f, g]), project=project, tol=tol, max_iter=max_iter,
                damping=damping, memory=memory, what="band-class",
            )
        else:
            x, res, it = _fixed_point(
                multiplicative_step, np.concatenate([f, g]), project=project, tol=tol,
                max_iter=max_iter, damping=1.0, memory=0, what="band-class",
            )
        f, g = x[:G], x[G:]
        if f_frozen:
            f = u.copy()
        if g_frozen:
            g = floor.copy()
    hc = h_components(SpectralPair(f, g), a=a_spec, L=L)
    mult = band_multipliers(f, g, hc.h_f, hc.h_g, klass)
    out = _finalize(f, g, a_spec, L, klass, mult, {"iteration": res}, it)
    out.residuals["equation"] = _band_equation_residual(f, g, hc.h_f**2, hc.h_g**2, klass)
    out.residuals.update(band_slackness(out))
    return out


def _active_sets(f, g, klass: BandContamination, rel: float = 1e-9):
    scale_f = max(float(np.max(klass.u)), 1e-300)
    scale_g = max(float(np.max(g)), 1e-300)
    at_v = f <= klass.v + rel * scale_f
    at_u = (f >= klass.u - rel * scale_f) & ~at_v
    at_floor = g <= klass.floor + rel * scale_g
    return at_v, at_u, at_floor


def _band_level(h2, free, d):
    if np.any(free):
        w = d[free]
        return float(np.sum(h2[free] * w) / np.sum(w)) if np.sum(w) > 0 else float(np.mean(h2[free]))
    return None


def _band_equation_residual(f, g, hf2, hg2, klass: BandContamination) -> float:
    at_v, at_u, at_floor = _active_sets(f, g, klass)
    free_f = ~(at_v | at_u)
    free_g = ~at_floor
    worst = 0.0
    lvl = _band_level(hf2, free_f, f)
    if lvl is not None and lvl > 0 and np.mean(klass.u) > klass.P1:
        worst = max(worst, float(np.max(np.abs(f[free_f] * (hf2[free_f] - lvl)))) / (klass.P1 * lvl))
        worst = max(worst, float(np.max(np.maximum(hf2[at_v] - lvl, 0), initial=0)) / lvl)
        worst = max(worst, float(np.max(np.maximum(lvl - hf2[at_u], 0), initial=0)) / lvl)
    lvl = _band_level(hg2, free_g, g)
    if lvl is not None and lvl > 0:
        worst = max(worst, float(np.max(np.abs(g[free_g] * (hg2[free_g] - lvl)))) / (max(klass.P2, 1e-300) * lvl))
        worst = max(worst, float(np.max(np.maximum(hg2[at_floor] - lvl, 0), initial=0)) / lvl)
    return worst


def band_multipliers(f, g, hf, hg, klass: BandContamination) -> dict:
    """alpha1, alpha2 and the pointwise gamma1 <= 0, gamma2 >= 0, phi <= 0.

    In the form h_f = gamma1 + gamma2 + 1/alpha1 and h_g = phi + 1/alpha2.
    """
    at_v, at_u, at_floor = _active_sets(f, g, klass)
    free_f = ~(at_v | at_u)
    free_g = ~at_floor
    if np.any(free_f) and np.mean(klass.u) > klass.P1:
        inv_a1 = float(np.sqrt(_band_level(hf**2, free_f, f)))
    else:
        inv_a1 = 0.0 if np.mean(klass.u) <= klass.P1 else float(np.median(hf))
    inv_a2 = float(np.sqrt(_band_level(hg**2, free_g, g))) if np.any(free_g) else float(np.max(hg))
    gamma1 = np.where(at_v, np.minimum(hf - inv_a1, 0.0), 0.0)
    gamma2 = np.where(at_u, np.maximum(hf - inv_a1, 0.0), 0.0)
    phi = np.where(at_floor, np.minimum(hg - inv_a2, 0.0), 0.0)
    return {
        "alpha1": 1.0 / inv_a1 if inv_a1 > 0 else float("inf"),
        "alpha2": 1.0 / inv_a2 if inv_a2 > 0 else float("inf"),
        "gamma1": gamma1,
        "gamma2": gamma2,
        "phi": phi,
    }


def band_slackness(solution: MinimaxSolution) -> dict:
    """Pointwise complementary slackness and admissibility of a band solution."""
    k = solution.klass
    m = solution.multipliers
    f0, g0 = solution.f0, solution.g0
    return {
        "slack_gamma1": float(np.max(np.abs(m["gamma1"] * (f0 - k.v)))),
        "slack_gamma2": float(np.max(np.abs(m["gamma2"] * (k.u - f0)))),
        "slack_phi": float(np.max(np.abs(m["phi"] * (g0 - k.floor)))),
        "admissible": bool(k.is_admissible(f0, g0)),
    }


def solve_minimax(klass: DensityClass, a=(1.0,), **kwargs) -> MinimaxSolution:
    if isinstance(klass, PowerPair):
        return least_favorable_power(klass, a, **kwargs)
    if isinstance(klass, JointMinimal):
        return least_favorable_joint(klass, a, **kwargs)
    if isinstance(klass, BandContamination):
        kwargs.pop("G", None)
        return least_favorable_band_eps(klass, a, **kwargs)
    raise ValidationError(f"unknown density class {type(klass).__name__}")


@dataclass(frozen=True)
class SaddleReport:
    passes: bool
    left_violation: float
    right_violation: float
    n_trials: int
    tolerance: float
    worst_right_delta: float
    worst_left_delta: float


def verify_saddle_point(
    solution: MinimaxSolution,
    klass: DensityClass | None = None,
    n_trials: int = 200,
    seed: int = 0,
    *,
    tol: float = 1e-8,
    slack: float | None = None,
    perturbation: float = 0.1,
    perturbation_lags: int = 8,
) -> SaddleReport:
    """Randomized check of Delta(h; f0, g0) >= Delta(h0; f0, g0) >= Delta(h0; f, g).

    The right inequality is sampled over random admissible pairs (including
    narrow spikes); the left one over h0 plus random causal perturbations.
    Both excesses are relative to max(1, Delta0).  ``slack`` defaults to the
    recorded ``supremum_gap`` (zero when the supremum is attained).
    """
    klass = klass if klass is not None else solution.klass
    G = solution.grid_size
    A = solution.functional.transfer(G)
    f0, g0, h0 = solution.f0, solution.g0, solution.h0
    d0 = error_functional(h0, f0, g0, A)
    rng = np.random.default_rng(seed)
    right = left = 0.0
    worst_r, worst_l = -np.inf, np.inf
    scale = max(1.0, abs(d0))
    for _ in range(n_trials):
        f, g = klass.sample(rng, G)
        dr = error_functional(h0, f, g, A)
        worst_r = max(worst_r, dr)
        right = max(right, (dr - d0) / scale)
        K = int(perturbation_lags)
        delta = rng.normal(size=K) * perturbation
        if np.iscomplexobj(h0) and np.iscomplexobj(solution.functional.a):
            delta = delta + 1j * rng.normal(size=K) * perturbation
        h = h0 + trig_series(delta, G)
        dl = error_functional(h, f0, g0, A)
        worst_l = min(worst_l, dl)
        left = max(left, (d0 - dl) / scale)
    if slack is None:
        slack = float(solution.residuals.get("supremum_gap", 0.0)) / scale
    bound = tol + slack
    return SaddleReport(bool(left <= bound and right <= bound), float(left), float(right), n_trials, bound, float(worst_r), float(worst_l))
