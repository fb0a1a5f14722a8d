"""Shared numerical kernels: quadrature, RK4 integration, scalar search, fixed points.

All kernels are pure functions of their inputs and safe to call concurrently.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, FixedPointError, NumericsError

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and grid sizes shared by the solver pipelines."""

    quad_tol: float = 1e-10
    ode_step_init: float = 0.0  # 0 -> start each grid cell with a single RK4 substep
    ode_tol: float = 1e-8
    opt_tol: float = 1e-9
    fp_damping: float = 1.0
    fp_max_iter: int = 200
    grid_points: int = 401

    def __post_init__(self):
        for name in ("quad_tol", "ode_tol", "opt_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.fp_damping <= 1.0:
            raise ValueError("fp_damping must lie in (0, 1]")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be at least 1")
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 50,
    points: Sequence[float] = (),
) -> float:
    """Adaptive Simpson estimate of the integral of ``f`` over ``[a, b]``.

    ``b`` may be ``math.inf``; the tail is mapped to (0, 1) by
    ``y = a + t/(1-t)``, which requires the integrand to vanish at infinity.
    ``points`` lists known kinks at which the interval is split beforehand.

    Raises:
        NumericsError: subdivision exceeded ``max_depth`` before reaching ``tol``.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate(f, b, a, tol, max_depth, points)
    if math.isinf(b):

        def g(t: float) -> float:
            if t >= 1.0 - 1e-14:
                return 0.0
            u = 1.0 - t
            return f(a + t / u) / (u * u)

        inner = sorted(p for p in points if a < p < b)
        tpts = tuple((p - a) / (1.0 + p - a) for p in inner)
        return integrate(g, 0.0, 1.0, tol, max_depth, tpts)

    knots = [a] + sorted(p for p in points if a < p < b) + [b]
    if len(knots) > 2:
        sub_tol = tol / (len(knots) - 1)
        return sum(
            integrate(f, lo, hi, sub_tol, max_depth)
            for lo, hi in zip(knots[:-1], knots[1:])
        )

    def simpson(fa: float, fm: float, fb: float, h: float) -> float:
        return h / 6.0 * (fa + 4.0 * fm + fb)

    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = simpson(fa, fm, fb, b - a)
    # stack of (lo, mid, hi, f_lo, f_mid, f_hi, estimate, tol, depth)
    stack = [(a, m, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        lo, mid, hi, flo, fmid, fhi, est, tloc, depth = stack.pop()
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(flo, flm, fmid, mid - lo)
        right = simpson(fmid, frm, fhi, hi - mid)
        err = (left + right - est) / 15.0
        if abs(err) <= tloc:
            total += left + right + err
            continue
        if depth >= max_depth:
            raise NumericsError(
                f"adaptive Simpson exceeded max depth {max_depth} on [{lo}, {hi}]"
            )
        stack.append((lo, lm, mid, flo, flm, fmid, left, tloc / 2.0, depth + 1))
        stack.append((mid, rm, hi, fmid, frm, fhi, right, tloc / 2.0, depth + 1))
    if not math.isfinite(total):
        raise NumericsError("adaptive Simpson produced a non-finite value")
    return total


def cumulative_simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of uniformly sampled values.

    Each segment integral uses the cubic through its four nearest samples
    (averaged symmetrically in the interior), so the rule is exact on cubics
    and fourth-order accurate throughout, boundary segments included.
    """
    y = np.asarray(values, dtype=float)
    n = y.size
    out = np.zeros(n)
    if n < 2:
        return out
    if n == 2:
        out[1] = 0.5 * h * (y[0] + y[1])
        return out
    seg = np.empty(n - 1)
    if n == 3:
        seg[0] = h / 12.0 * (5.0 * y[0] + 8.0 * y[1] - y[2])
        seg[1] = h / 12.0 * (-y[0] + 8.0 * y[1] + 5.0 * y[2])
    else:
        seg[0] = h / 24.0 * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3])
        seg[-1] = h / 24.0 * (y[-4] - 5.0 * y[-3] + 19.0 * y[-2] + 9.0 * y[-1])
        if n > 3:
            i = np.arange(1, n - 2)
            seg[1:-1] = h / 24.0 * (-y[i - 1] + 13.0 * y[i] + 13.0 * y[i + 1] - y[i + 2])
    out[1:] = np.cumsum(seg)
    return out


def gauss_legendre_nodes(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights rescaled to [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


# ---------------------------------------------------------------------------
# Initial value problems
# ---------------------------------------------------------------------------


@dataclass
class IvpResult:
    values: np.ndarray
    substeps: np.ndarray
    verify_gap: float


def _rk4_run(rhs, a: float, b: float, y0: float, n: int) -> float:
    h = (b - a) / n
    y = y0
    x = a
    for _ in range(n):
        k1 = rhs(x, y)
        k2 = rhs(x + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(x + h, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x += h
    return y


def solve_ivp(
    rhs: Callable[[float, float], float],
    x0: float,
    y0: float,
    x_grid: Sequence[float],
    tol: float = 1e-8,
    step_init: float = 0.0,
    max_substeps: int = 1 << 17,
) -> IvpResult:
    """Classical RK4 on a fixed output grid with Richardson-style refinement.

    Each grid cell is marched with a fixed number of substeps, doubled until
    successive refinements agree; a final whole-grid pass with doubled counts
    must agree with the accepted solution within ``tol`` in sup norm.
    """
    grid = np.asarray(x_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise NumericsError("x_grid must be a 1-D array of at least one node")
    if abs(grid[0] - x0) > 1e-12 * max(1.0, abs(x0)):
        raise NumericsError("x_grid must start at x0")
    if np.any(np.diff(grid) < 0.0):
        raise NumericsError("x_grid must be nondecreasing")
    span = grid[-1] - grid[0]
    ncell = grid.size - 1
    if span == 0.0 or ncell == 0:
        return IvpResult(np.full(grid.size, float(y0)), np.zeros(ncell, dtype=int), 0.0)

    def march(counts: np.ndarray) -> np.ndarray:
        ys = np.empty(grid.size)
        ys[0] = y0
        y = float(y0)
        for j in range(ncell):
            a, b = grid[j], grid[j + 1]
            if b > a:
                y = _rk4_run(rhs, a, b, y, int(counts[j]))
            ys[j + 1] = y
        return ys

    counts = np.ones(ncell, dtype=int)
    ys = np.empty(grid.size)
    ys[0] = y0
    y = float(y0)
    for j in range(ncell):
        a, b = grid[j], grid[j + 1]
        if b == a:
            ys[j + 1] = y
            continue
        n = 1
        if step_init > 0.0:
            n = max(1, int(math.ceil((b - a) / step_init)))
        alloc = tol * (b - a) / span
        y1 = _rk4_run(rhs, a, b, y, n)
        while True:
            y2 = _rk4_run(rhs, a, b, y, 2 * n)
            if abs(y2 - y1) <= alloc * max(1.0, abs(y2)) or 2 * n >= max_substeps:
                break
            n *= 2
            y1 = y2
        counts[j] = 2 * n
        y = y2
        ys[j + 1] = y

    for _ in range(4):
        ys2 = march(counts * 2)
        gap = float(np.max(np.abs(ys2 - ys)))
        if gap <= tol * max(1.0, float(np.max(np.abs(ys2)))):
            return IvpResult(ys2, counts * 2, gap)
        counts *= 2
        ys = ys2
    raise NumericsError(f"RK4 refinement failed to converge (last gap {gap:.3e})")


# ---------------------------------------------------------------------------
# Scalar maximization and root finding
# ---------------------------------------------------------------------------


@dataclass
class MaximizeResult:
    x: float
    value: float
    degenerate: bool
    nfev: int


def maximize_scalar(
    h: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-9,
) -> MaximizeResult:
    """Golden-section search for the maximum of ``h`` on [lo, hi].

    Derivative-free; the final bracket is polished with one parabolic step and
    the best evaluated point is returned. A flat objective is flagged
    ``degenerate`` rather than treated as an error.
    """
    if not lo < hi:
        raise NumericsError("maximize_scalar requires lo < hi")
    nfev = 0
    seen_min = math.inf
    seen_max = -math.inf
    best_x, best_f = lo, -math.inf

    def eval_h(x: float) -> float:
        nonlocal nfev, seen_min, seen_max, best_x, best_f
        v = float(h(x))
        nfev += 1
        if not math.isfinite(v):
            raise NumericsError(f"objective returned non-finite value at x={x}")
        seen_min = min(seen_min, v)
        seen_max = max(seen_max, v)
        if v > best_f:
            best_x, best_f = x, v
        return v

    width_tol = tol * max(1.0, abs(lo), abs(hi))
    a, b = float(lo), float(hi)
    eval_h(a)
    eval_h(b)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = eval_h(c), eval_h(d)
    while b - a > width_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = eval_h(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = eval_h(d)

    # one parabolic polish through (a, mid, b)
    mid = 0.5 * (a + b)
    fa, fm, fb = eval_h(a), eval_h(mid), eval_h(b)
    denom = (a - mid) * (fm - fb) - (b - mid) * (fm - fa)
    if abs(denom) > 0.0:
        num = (a - mid) ** 2 * (fm - fb) - (b - mid) ** 2 * (fm - fa)
        cand = mid - 0.5 * num / denom
        if lo < cand < hi and math.isfinite(cand):
            eval_h(cand)

    degenerate = (seen_max - seen_min) <= 1e-14 * max(1.0, abs(seen_max))
    return MaximizeResult(best_x, best_f, degenerate, nfev)


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> float:
    """Bisection root of ``f`` on [lo, hi]; requires a sign change."""
    flo, fhi = float(f(lo)), float(f(hi))
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo:.3e}, {fhi:.3e}")
    a, b = float(lo), float(hi)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a), abs(b)):
            break
        m = 0.5 * (a + b)
        fm = float(f(m))
        if fm == 0.0:
            return m
        if flo * fm < 0.0:
            b = m
        else:
            a, flo = m, fm
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------


@dataclass
class FixedPointResult:
    curve: np.ndarray
    iterations: int
    residual: float
    residual_history: list[float] = field(default_factory=list)
    damping_final: float = 1.0

    @property
    def contraction_estimate(self) -> float:
        """Median ratio of successive residuals; rough Lipschitz estimate."""
        r = self.residual_history
        ratios = [r[i + 1] / r[i] for i in range(len(r) - 1) if r[i] > 0.0]
        return float(np.median(ratios)) if ratios else 0.0


def fixed_point(
    op: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    damping: float = 1.0,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> FixedPointResult:
    """Damped Picard iteration ``x <- (1-d) x + d op(x)`` to sup-norm residual ``tol``.

    The damping factor is halved whenever the residual increases, down to a
    floor of 1/64; non-convergence raises ``FixedPointError`` carrying the
    residual history.
    """
    x = np.array(init, dtype=float, copy=True)
    d = float(damping)
    history: list[float] = []
    for k in range(1, max_iter + 1):
        tx = np.asarray(op(x), dtype=float)
        resid = float(np.max(np.abs(tx - x))) if x.size else 0.0
        history.append(resid)
        if resid <= tol:
            return FixedPointResult(tx, k, resid, history, d)
        if len(history) >= 2 and resid > history[-2] and d > 1.0 / 64.0:
            d *= 0.5
        x = (1.0 - d) * x + d * tx
    raise FixedPointError(
        f"fixed point did not converge in {max_iter} iterations "
        f"(last residual {history[-1]:.3e})",
        residual_history=history,
    )


def derivative_on_grid(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative of uniform samples."""
    y = np.asarray(values, dtype=float)
    n = y.size
    if n < 5:
        return np.gradient(y, h)
    out = np.empty(n)
    out[2:-2] = (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * h)
    # one-sided 5-point stencils at the edges
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
    out[0] = c0 @ y[:5]
    out[1] = c1 @ y[:5]
    out[-1] = -(c0 @ y[-5:][::-1])
    out[-2] = -(c1 @ y[-5:][::-1])
    return out
