"""Independent checks: MA simulation, finite-window projections and brute-force maximization.

Nothing here calls the half-infinite solvers' internals except to evaluate
Delta(f, g) inside :func:`grid_maximize_delta`.  Covariances follow the
spectral convention R(k) = E xi(t+k) conj(xi(t)) = (1/2pi) int exp(i k lambda) f,
which is the lag -k entry of :func:`spectral.lag_transform`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConsistencyError, MinimalityError, ValidationError
from .filtering import as_functional, solve_filter
from .operators import SpectralPair
from .spectral import DEFAULT_GRID, evaluate_density, lag_transform, native_grid_size

CHUNK = 10_000
TRUNCATION_L1 = 1e-6


@dataclass(frozen=True)
class SamplePath:
    """x(0), x(-1), ..., x(-(n-1)) of one MA realization, most recent first."""

    values: np.ndarray
    seed: int
    coeffs: np.ndarray

    def __len__(self) -> int:
        return self.values.size

    def autocovariance(self, k: int) -> float:
        """Sample lag-k autocovariance (1/n) sum_t x(t+k) conj(x(t))."""
        x = self.values[::-1]
        n = x.size
        if not 0 <= k < n:
            raise ValidationError(f"lag {k} outside [0, {n})")
        return complex(np.sum(x[k:] * np.conj(x[: n - k])) / n) if np.iscomplexobj(x) else float(
            np.sum(x[k:] * x[: n - k]) / n
        )


def _ma_coeffs(b) -> np.ndarray:
    b = np.atleast_1d(np.asarray(b))
    if b.ndim != 1 or b.size == 0 or not np.all(np.isfinite(b)):
        raise ValidationError("MA coefficients must be a finite 1-D sequence")
    return b.astype(complex if np.iscomplexobj(b) else float)


def _innovations(rng: np.random.Generator, shape, complex_: bool) -> np.ndarray:
    if complex_:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return rng.standard_normal(shape)


def _ma_block(e: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Rows of x(0..-(n-1)) from innovations e(0..-(n+q-1)), most recent first."""
    # x(-k) = sum_j b(j) e(-k-j)
    return sliding_window_view(e, b.size, axis=-1)[..., :n, :] @ b


def simulate_ma(b, n: int, seed: int = 0) -> SamplePath:
    """x(t) = sum_k b(k) e(t-k) with standard normal innovations (complex normal for complex b)."""
    b = _ma_coeffs(b)
    n = int(n)
    if n <= 0:
        raise ValidationError("path length must be positive")
    rng = np.random.default_rng(seed)
    e = _innovations(rng, n + b.size - 1, np.iscomplexobj(b))
    return SamplePath(_ma_block(e, b, n), int(seed), b)


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    paths: int
    window: int
    bias_bound: float

    def __iter__(self):
        return iter((self.mean, self.stderr))


def truncate_weights(w, tol: float = TRUNCATION_L1) -> tuple[np.ndarray, float]:
    """Shortest prefix of w whose neglected l1 tail is below ``tol``; returns it and the tail."""
    w = np.atleast_1d(np.asarray(w))
    tails = np.concatenate([np.cumsum(np.abs(w[::-1]))[::-1], [0.0]])
    K = int(np.argmax(tails < tol))
    return w[: max(K, 1)].copy(), float(tails[max(K, 1)])


def empirical_mse(
    w,
    b_f,
    b_g,
    a=(1.0,),
    n: int | None = None,
    paths: int = 100_000,
    seed: int = 0,
    *,
    tol: float = TRUNCATION_L1,
) -> MonteCarloResult:
    """Mean of |sum a(k) xi(-k) - sum w(k) (xi(-k) + eta(-k))|^2 over independent paths.

    Weights are cut where the neglected l1 mass drops below ``tol`` (or at
    the window ``n`` if that is shorter); ``bias_bound`` bounds the effect of
    the cut.  Paths are generated in fixed chunks, chunk c drawing from
    ``SeedSequence(seed, spawn_key=(c,))``, so any split of the chunks across
    workers reproduces the same numbers.
    """
    a_vec = as_functional(a).a
    b_f, b_g = _ma_coeffs(b_f), _ma_coeffs(b_g)
    w = np.atleast_1d(np.asarray(w))
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    paths = int(paths)
    if paths < 2:
        raise ValidationError("at least two paths are needed for a standard error")
    w_cut, tail = truncate_weights(w, tol)
    if n is not None:
        if n < a_vec.size:
            raise ValidationError(f"window n={n} is shorter than the functional ({a_vec.size})")
        dropped = w_cut[n:]
        w_cut = w_cut[:n]
        tail += float(np.sum(np.abs(dropped)))
    K = max(w_cut.size, a_vec.size)
    complex_ = any(np.iscomplexobj(x) for x in (w_cut, a_vec, b_f, b_g))
    aw = np.zeros(K, dtype=complex if complex_ else float)
    ww = np.zeros_like(aw)
    aw[: a_vec.size] = a_vec
    ww[: w_cut.size] = w_cut
    total, total_sq = 0.0, 0.0
    for c, start in enumerate(range(0, paths, CHUNK)):
        m = min(CHUNK, paths - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        xi = _ma_block(_innovations(rng, (m, K + b_f.size - 1), complex_), b_f, K)
        eta = _ma_block(_innovations(rng, (m, K + b_g.size - 1), complex_), b_g, K)
        err2 = np.abs(xi @ aw - (xi + eta) @ ww) ** 2
        total += float(np.sum(err2))
        total_sq += float(np.sum(err2**2))
    mean = total / paths
    var = max(total_sq / paths - mean**2, 0.0) * paths / (paths - 1)
    # dropped part D of the estimate: E|D|^2 <= (l1 tail)^2 * var(xi(0) + eta(0))
    d = tail * np.sqrt(float(np.sum(np.abs(b_f) ** 2) + np.sum(np.abs(b_g) ** 2)))
    bias = 2.0 * np.sqrt(mean) * d + d**2
    return MonteCarloResult(mean, float(np.sqrt(var / paths)), paths, K, float(bias))


def covariances(d, n_lags: int, G: int | None = None) -> np.ndarray:
    """R(0..n_lags) = E x(t+k) conj x(t) from grid Fourier coefficients of d."""
    if G is None:
        G = native_grid_size(d) or DEFAULT_GRID
    samples = evaluate_density(d, G)
    if n_lags >= samples.size // 2:
        raise ValidationError(f"{n_lags} lags are not resolved by a grid of {samples.size}")
    c = lag_transform(samples)
    r = c[(-np.arange(n_lags + 1)) % samples.size]
    return r.real.copy() if np.allclose(r.imag, 0, atol=1e-15 * max(1.0, abs(r[0]))) else r


@dataclass(frozen=True)
class ProjectionResult:
    weights: np.ndarray
    mse: float
    window: int


def toeplitz_projection(f, g, a=(1.0,), M: int = 512, G: int | None = None) -> ProjectionResult:
    """Best estimate of sum a(j) xi(-j) from y(0), ..., y(-M), y = xi + eta.

    Solves T w = b with T_{l,k} = R_y(l-k) and b(l) = sum_j a(j) R_xi(l-j)
    by Levinson recursion, and returns the exact finite-window error
    E|A xi|^2 - <b, w>.
    """
    a_vec = as_functional(a).a
    M = int(M)
    N = a_vec.size - 1
    if M < N:
        raise ValidationError(f"window M={M} must be at least the functional order N={N}")
    fs = evaluate_density(f, G or native_grid_size(f) or native_grid_size(g) or DEFAULT_GRID)
    G = fs.size
    gs = evaluate_density(g, G)
    if np.min(fs + gs) <= 0:
        raise MinimalityError("f + g vanishes on the grid")
    span = M + N
    r_xi = covariances(fs, span, G)
    r_y = r_xi[: M + 1] + covariances(gs, M, G)

    def r_at(r, k):
        k = np.asarray(k)
        return np.where(k >= 0, r[np.abs(k)], np.conj(r[np.abs(k)]))

    l = np.arange(M + 1)
    j = np.arange(N + 1)
    b = r_at(r_xi, l[:, None] - j[None, :]) @ a_vec
    try:
        w = sla.solve_toeplitz((r_y, np.conj(r_y)), b)
    except np.linalg.LinAlgError as exc:
        raise ConsistencyError(f"covariance matrix of the window is singular: {exc}") from None
    if not np.all(np.isfinite(w)):
        raise ConsistencyError("covariance matrix of the window is singular")
    target = np.real(np.vdot(a_vec, r_at(r_xi, j[None, :] - j[:, None]).T @ a_vec))
    err = float(target - np.real(np.vdot(b, w)))
    return ProjectionResult(w, err, M)


def bauer_factor(d, L: int, n: int = 512, G: int | None = None) -> np.ndarray:
    """Factor coefficients h(0..L-1) from the Cholesky factor of an n x n covariance block.

    The last row of the lower Cholesky factor of [R(s-t)] converges to the
    minimum-phase factor as n grows (Bauer's method).
    """
    if L > n:
        raise ValidationError("factor length cannot exceed the block size")
    r = covariances(d, n - 1, G)
    T = sla.toeplitz(r, np.conj(r))
    try:
        C = np.linalg.cholesky(T)
    except np.linalg.LinAlgError:
        raise MinimalityError("covariance block is not positive definite") from None
    return C[n - 1, ::-1][:L].copy()


@dataclass(frozen=True)
class GridMaxResult:
    f: np.ndarray
    g: np.ndarray
    delta: float
    restart_deltas: np.ndarray
    evaluations: int

    @property
    def spread(self) -> float:
        return float(np.max(self.restart_deltas) - np.min(self.restart_deltas))

    def __iter__(self):
        return iter((self.f, self.g, self.delta))


def _coarse_class(klass, n_nodes: int, G: int):
    from .minimax import BandContamination

    if isinstance(klass, BandContamination):
        if klass.G != G:
            step = klass.G // G
            if step < 1 or klass.G % G:
                raise ValidationError(f"band class on {klass.G} points cannot be coarsened to {G}")
            klass = BandContamination(klass.v[::step], klass.u[::step], klass.P1, klass.g1[::step], klass.eps, klass.P2)
    return klass.restrict(n_nodes)


def grid_maximize_delta(
    klass,
    a=(1.0,),
    *,
    n_nodes: int = 64,
    G: int = 256,
    L: int = 32,
    restarts: int = 20,
    seed: int = 0,
    sweeps: int = 60,
    floor: float = 1e-6,
    tol: float = 1e-10,
) -> GridMaxResult:
    """Brute-force maximization of Delta(f, g) over piecewise-constant admissible pairs.

    Densities are constant on ``n_nodes`` cells of a grid of ``G`` points.
    Each restart starts from a random admissible pair and alternates
    projected ascent steps on the f block and the g block, with ascent
    directions from the cellwise gradient int_cell |A - h|^2 (for f) and
    int_cell |h|^2 (for g) and a backtracking step length.  Cells are kept
    at least ``floor`` times the mean level so that minimality holds.
    """
    if G % n_nodes:
        raise ValidationError(f"G={G} must be a multiple of n_nodes={n_nodes}")
    if 2 * L >= G // 2:
        raise ValidationError(f"L={L} needs lags up to {2 * L}; use G > {4 * L}")
    coarse = _coarse_class(klass, n_nodes, G)
    a_spec = as_functional(a)
    A = a_spec.transfer(G)
    rep = G // n_nodes
    rng = np.random.default_rng(seed)
    evals = 0

    def cells(x):
        m = x.reshape(n_nodes, rep).mean(axis=1)
        return np.repeat(m, rep)

    def admissible(f, g):
        f, g = cells(f), cells(g)
        f = np.maximum(f, floor * max(float(np.mean(f)), 0.0))
        g = np.maximum(g, floor * max(float(np.mean(g)), 0.0))
        return coarse.project(f, g)

    def value(f, g):
        nonlocal evals
        evals += 1
        try:
            sol = solve_filter(SpectralPair(f, g), a=a_spec, L=L)
        except MinimalityError:
            return -np.inf, None, None
        h = sol.h
        return sol.mse, np.abs(A - h) ** 2, np.abs(h) ** 2

    best = (-np.inf, None, None)
    per_restart = []
    for _ in range(int(restarts)):
        f, g = admissible(*coarse.sample(rng, G))
        d, hf2, hg2 = value(f, g)
        steps = [1.0, 1.0]
        for _sweep in range(int(sweeps)):
            start = d
            for block in (0, 1):
                if hf2 is None:
                    break
                x, grad = (f, hf2) if block == 0 else (g, hg2)
                direction = cells(grad)
                direction = direction - np.mean(direction)
                scale = np.max(np.abs(direction))
                if scale <= 0:
                    continue
                direction = direction / scale * max(float(np.mean(x)), 1e-12)
                t = steps[block] * 2.0
                for _bt in range(30):
                    cand = x + t * direction
                    cf, cg = admissible(cand, g) if block == 0 else admissible(f, cand)
                    dc, cf2, cg2 = value(cf, cg)
                    if dc > d:
                        f, g, d, hf2, hg2 = cf, cg, dc, cf2, cg2
                        break
                    t *= 0.5
                steps[block] = t
            if d - start <= tol * max(1.0, abs(d)):
                break
        per_restart.append(d)
        if d > best[0]:
            best = (d, f, g)
    d, f, g = best
    if f is not None and not coarse.is_admissible(f, g):
        raise ConsistencyError("grid oracle produced an inadmissible pair")
    return GridMaxResult(f, g, float(d), np.array(per_restart), evals)
