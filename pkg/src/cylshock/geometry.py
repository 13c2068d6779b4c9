"""The free boundary x = f(r), shock-frame vectors, the shock-flattening
coordinate map, and the polynomial-reflection extension across the shock.

Flattened coordinates (y, t): t = r and y = (x - 1)/(1 - f(r)) + 1, so the
shock sits at y = 0 and the exit at y = 1 for every radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ShockEscapeError
from .upstream import UpstreamSolution

__all__ = [
    "EXTENSION_COEFFS",
    "SHOCK_BRACKET",
    "ShockCurve",
    "FlattenedGrid",
    "shock_frame",
    "flatten",
    "unflatten",
    "extend_field",
    "eval_extended",
    "resample_field",
    "update_shock",
]

#: Reflection weights c_i with sum c_i (-1/i)^m = 1 for m = 0, 1, 2: the
#: extension reproduces quadratics across y = 0 (and provably not cubics).
EXTENSION_COEFFS = (6.0, -32.0, 27.0)

#: Admissible shock positions; leaving it is reported as divergence.
SHOCK_BRACKET = 0.25


class ShockCurve:
    """Radial samples of the shock position with spline derivative access.

    The spline is clamped to f'(0) = 0 at the axis (symmetry) and closed
    with a natural end at the wall.
    """

    def __init__(self, r: np.ndarray, f: np.ndarray):
        r = np.asarray(r, dtype=float)
        f = np.asarray(f, dtype=float)
        if r.shape != f.shape or r.ndim != 1:
            raise ValueError("r and f must be matching 1-D arrays")
        fmax = float(np.max(np.abs(f)))
        if fmax >= SHOCK_BRACKET:
            raise ShockEscapeError(f"|f| = {fmax:.4f} reached the bracket {SHOCK_BRACKET}")
        self.r = r
        self.f = f
        self._spline = CubicSpline(r, f, bc_type=((1, 0.0), (2, 0.0)))
        self._dspline = self._spline.derivative()

    @classmethod
    def flat(cls, n: int) -> "ShockCurve":
        r = np.linspace(0.0, 1.0, n)
        return cls(r, np.zeros(n))

    def __call__(self, r):
        return self._spline(r)

    def fprime(self, r):
        return self._dspline(r)

    @property
    def fprime_nodes(self) -> np.ndarray:
        return self._dspline(self.r)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.f)))


@dataclass(frozen=True)
class FlattenedGrid:
    """Uniform nodes (y_i, t_j) on the unit square; fields are (n_y, n_t)."""

    n_y: int
    n_t: int
    y: np.ndarray = dc_field(repr=False, default=None)
    t: np.ndarray = dc_field(repr=False, default=None)

    def __post_init__(self):
        if self.n_y < 9 or self.n_t < 9:
            raise ValueError("grid must be at least 9x9")
        object.__setattr__(self, "y", np.linspace(0.0, 1.0, self.n_y))
        object.__setattr__(self, "t", np.linspace(0.0, 1.0, self.n_t))

    @property
    def h_y(self) -> float:
        return 1.0 / (self.n_y - 1)

    @property
    def h_t(self) -> float:
        return 1.0 / (self.n_t - 1)

    def mesh(self):
        return np.meshgrid(self.y, self.t, indexing="ij")

    def x_physical(self, shock: ShockCurve) -> np.ndarray:
        """Physical axial coordinate of every node under the inverse map."""
        yy, tt = self.mesh()
        return (yy - 1.0) * (1.0 - shock(tt)) + 1.0


def shock_frame(fprime):
    """Unit downstream normal and tangent of the shock in the (x, r) plane:
    n = (1, -f')/sqrt(1+f'^2), tau = (f', 1)/sqrt(1+f'^2)."""
    fp = np.asarray(fprime, dtype=float)
    s = np.sqrt(1.0 + fp**2)
    n = np.stack([np.ones_like(fp) / s, -fp / s])
    tau = np.stack([fp / s, np.ones_like(fp) / s])
    return n, tau


def flatten(x, r, shock: ShockCurve):
    """Physical (x, r) to flattened (y, t)."""
    return (np.asarray(x) - 1.0) / (1.0 - shock(r)) + 1.0, np.asarray(r)


def unflatten(y, t, shock: ShockCurve):
    """Flattened (y, t) to physical (x, r)."""
    return (np.asarray(y) - 1.0) * (1.0 - shock(t)) + 1.0, np.asarray(t)


def _row_splines(field: np.ndarray, y: np.ndarray) -> CubicSpline:
    # not-a-knot spline: exact on cubics, so the degree<=2 reproduction of
    # the reflection weights survives the off-node evaluations
    return CubicSpline(y, field, axis=0)


def eval_extended(spline: CubicSpline, yq):
    """Evaluate a field spline at y in (-1, 1], using the reflection sum
    sum_i c_i field(-y/i) left of the shock."""
    yq = np.asarray(yq, dtype=float)
    out = spline(np.clip(yq, 0.0, None))
    neg = yq < 0.0
    if np.any(neg):
        yn = yq[neg]
        acc = sum(c * spline(-yn / i) for i, c in enumerate(EXTENSION_COEFFS, start=1))
        out[neg] = acc
    return out


def eval_extended_deriv(spline: CubicSpline, yq):
    """d/dy of ``eval_extended``."""
    yq = np.asarray(yq, dtype=float)
    d = spline.derivative()
    out = d(np.clip(yq, 0.0, None))
    neg = yq < 0.0
    if np.any(neg):
        yn = yq[neg]
        acc = sum(c * d(-yn / i) * (-1.0 / i) for i, c in enumerate(EXTENSION_COEFFS, start=1))
        out[neg] = acc
    return out


def extend_field(field: np.ndarray, grid: FlattenedGrid):
    """Extend a field from y in [0, 1] to y in (-1, 1] by the reflection sum.

    Returns (y_ext, field_ext) where the first n_y - 1 rows hold the
    extension at y = -(n_y-1)h, ..., -h and the rest is the input.
    """
    field = np.atleast_2d(np.asarray(field, dtype=float).T).T  # 1-D becomes (n_y, 1)
    spline = _row_splines(field, grid.y)
    y_neg = -grid.y[1:][::-1]
    ext = eval_extended(spline, y_neg)
    y_ext = np.concatenate([y_neg, grid.y])
    out = np.concatenate([ext, field], axis=0)
    return y_ext, out


def resample_field(
    field: np.ndarray, grid: FlattenedGrid, shock_old: ShockCurve, shock_new: ShockCurve
) -> np.ndarray:
    """Re-express a flattened field on the grid of a new shock curve.

    Row by row, the node at (y, t) under the new map sits at
    y_old = 1 + (y - 1)(1 - f_new(t))/(1 - f_old(t)) under the old one;
    values left of the old shock come from the reflection extension.
    """
    f_old = shock_old(grid.t)
    f_new = shock_new(grid.t)
    ratio = (1.0 - f_new) / (1.0 - f_old)
    out = np.empty_like(field)
    for j in range(grid.n_t):
        spline = CubicSpline(grid.y, field[:, j])
        yq = 1.0 + (grid.y - 1.0) * ratio[j]
        out[:, j] = eval_extended(spline, yq)
    return out


def update_shock(
    phi: np.ndarray,
    grid: FlattenedGrid,
    shock_old: ShockCurve,
    upstream: UpstreamSolution,
    relax: float = 0.7,
    threads: int = 1,
) -> ShockCurve:
    """Locate the shock from the potential deviation and under-relax.

    For each radial node the new position is the root of

        g(x) = phi(x, r_j) + u0p * x - phi_slope_j * x = 0

    with phi evaluated through the current flattening (reflection-extended
    left of y = 0).  g must be strictly decreasing with slope at most
    -(u0m - u0p)/2; a guard failure or a root outside (-1/4, 1/4) raises
    ShockEscapeError, which the driver reports as divergence.
    """
    bg = upstream.background
    if upstream.phi_slope is None:
        raise ValueError("upstream must be Helmholtz-decomposed first")
    if len(upstream.r) != grid.n_t:
        raise ValueError("upstream radial grid must match the flattened grid")
    guard = -(bg.u0m - bg.u0p) / 2.0
    lo, hi = -SHOCK_BRACKET, SHOCK_BRACKET

    def find_root(j: int) -> float:
        spline = CubicSpline(grid.y, phi[:, j])
        scale = 1.0 - shock_old.f[j]
        lin = bg.u0p - upstream.phi_slope[j]

        def g(x):
            return float(eval_extended(spline, 1.0 + (x - 1.0) / scale)) + lin * x

        def gp(x):
            return float(eval_extended_deriv(spline, 1.0 + (x - 1.0) / scale)) / scale + lin

        ga, gb = g(lo), g(hi)
        if not (ga > 0.0 > gb):
            raise ShockEscapeError(
                f"no root in ({lo}, {hi}) at r={grid.t[j]:.4f}: g({lo})={ga:.3e}, g({hi})={gb:.3e}"
            )
        a, b = lo, hi
        x = min(max(shock_old.f[j], a), b)
        for _ in range(100):
            gx = g(x)
            if abs(gx) < 1e-13:
                break
            if gx > 0.0:
                a = x
            else:
                b = x
            slope = gp(x)
            if slope > guard:
                raise ShockEscapeError(
                    f"monotonicity guard failed at r={grid.t[j]:.4f}: slope {slope:.3e}"
                )
            x_new = x - gx / slope
            if not (a < x_new < b):
                x_new = 0.5 * (a + b)  # safeguard: bisect
            x = x_new
        else:
            raise ShockEscapeError(f"root refinement stalled at r={grid.t[j]:.4f}")
        return x

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            roots = np.fromiter(pool.map(find_root, range(grid.n_t)), dtype=float)
    else:
        roots = np.fromiter(map(find_root, range(grid.n_t)), dtype=float)

    f_new = (1.0 - relax) * shock_old.f + relax * roots
    return ShockCurve(grid.t.copy(), f_new)
