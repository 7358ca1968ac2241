"""Subordination functions for ``X + Y`` with ``X, Y`` free over ``L``.

For ``b`` in ``H^+(L)`` the solver finds ``omega2(b)`` as the attracting fixed
point of ``w -> b + h_X(b + h_Y(w))`` with ``h(w) = 1/G(w) - w``, then sets
``omega1 = b + h_Y(omega2)`` and ``G_{X+Y}(b) = G_X(omega1)``.  These satisfy

    1/G_{X+Y}(b) = 1/G_X(omega1) = 1/G_Y(omega2) = omega1 + omega2 - b.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .algebra import AlgebraElement, as_element, require_upper
from .errors import DegenerateSample, NoConvergence, NotInHalfPlane
from .models import (DEFAULT_TOL, DistributionModel, ScalarAtomic, _scaled_defect,
                     check_compatible)

THETA = 0.5
MAX_ITER = 100_000
# Below this imaginary part the stopping tolerance is relaxed in proportion.
NEAR_AXIS = 1e-9
NEAR_AXIS_MAX_ITER = 20_000
STALL_LIMIT = 50


@dataclass(frozen=True)
class SubordinationResult:
    b: AlgebraElement
    omega1: AlgebraElement
    omega2: AlgebraElement
    g_sum: AlgebraElement
    residual_vsubord: float
    residual_bsubord: float
    iterations: int

    @property
    def density(self) -> np.ndarray:
        """Per-coordinate ``-Im g_sum / pi``."""
        return -self.g_sum.values.imag / np.pi


def effective_tol(tol: float, b: np.ndarray) -> float:
    ymin = float(np.min(b.imag))
    return tol * max(1.0, NEAR_AXIS / ymin)


def _fixed_point(model_x, model_y, b, tol, max_iter, w0, theta):
    """Hybrid damped/Newton iteration for ``omega2``.

    Returns ``(w, iterations, converged, defect)``; on failure ``w`` is the
    best iterate seen and ``defect`` its scaled defect.
    """
    d = b.size
    eye = np.eye(d)
    hints = [None, None]

    def evaluate(w):
        gy, hy, jy, hints[1] = model_y._evaluate(w, hints[1], jac=True)
        u = b + hy
        gx, hx, jx, hints[0] = model_x._evaluate(u, hints[0], jac=True)
        return b + hx, jx @ jy

    w = np.array(b if w0 is None else w0, dtype=complex).reshape(-1)
    if w.shape != b.shape or np.any(w.imag <= 0):
        w = b.copy()
    F, J = evaluate(w)
    best_w, best_err, stall = w, np.inf, 0
    for it in range(1, max_iter + 1):
        dfe = F - w
        if not np.all(np.isfinite(dfe)):
            raise NoConvergence(f"NaN in subordination iterate after {it} iterations", it)
        err = _scaled_defect(dfe, w)
        if kernels.converged(dfe, w, tol):
            return F, it, True, err
        if err < best_err:
            if err < best_err * (1 - 1e-3):
                stall = 0
            best_w, best_err = w, err
        else:
            stall += 1
        if stall > STALL_LIMIT:
            return best_w, it, False, best_err
        accepted = False
        try:
            step = np.linalg.solve(eye - J, dfe)
        except np.linalg.LinAlgError:
            step = None
        if step is not None and np.all(np.isfinite(step)):
            cand = w + step
            if np.all(cand.imag > 0):
                Fc, Jc = evaluate(cand)
                if np.all(np.isfinite(Fc)) and _scaled_defect(Fc - cand, cand) < err:
                    w, F, J, accepted = cand, Fc, Jc, True
        if not accepted:
            w = w + theta * dfe
            F, J = evaluate(w)
    return best_w, max_iter, False, best_err


def solve_subordination(model_x: DistributionModel, model_y: DistributionModel, b,
                        tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER,
                        w0=None, theta: float = THETA) -> SubordinationResult:
    """Compute ``omega1(b)``, ``omega2(b)`` and ``G_{X+Y}(b)``.

    Parameters
    ----------
    model_x, model_y : DistributionModel
        Models over the same algebra.
    b : AlgebraElement or array_like
        Point of ``H^+(L)``.
    tol : float
        Stopping tolerance; relaxed by ``1e-9 / min Im b`` for points closer
        to the real axis than ``1e-9``.
    w0 : array_like, optional
        Starting guess for ``omega2`` (defaults to ``b``).

    Raises
    ------
    NotInHalfPlane
    NoConvergence
    """
    check_compatible(model_x, model_y)
    b = as_element(model_x.descriptor, b)
    require_upper(b)
    bv = b.values
    tol_eff = effective_tol(tol, bv)
    if np.min(bv.imag) < NEAR_AXIS:
        max_iter = min(max_iter, NEAR_AXIS_MAX_ITER)

    if isinstance(model_x, ScalarAtomic) and isinstance(model_y, ScalarAtomic):
        start = complex(bv[0] if w0 is None else np.asarray(w0).reshape(-1)[0])
        if not start.imag > 0:
            start = complex(bv[0])
        w, iters, ok, err = kernels.atomic_subordination(
            bv[0], model_x.locations, model_x.masses, model_y.locations, model_y.masses,
            start, theta, tol, max_iter)
        omega2 = np.array([w])
    else:
        omega2, iters, ok, err = _fixed_point(model_x, model_y, bv, tol, max_iter, w0, theta)
    # Near the axis the strict tolerance may be out of reach; accept the relaxed one.
    if not ok and not err <= tol_eff:
        raise NoConvergence(f"subordination did not converge at b={bv} "
                            f"(defect {err:.3g}, tol {tol_eff:.3g})", iters, err)

    gy, hy, _, _ = model_y._evaluate(omega2)
    omega1 = bv + hy
    gx = model_x._evaluate(omega1)[0]
    if not (np.all(omega1.imag > 0) and np.all(omega2.imag > 0) and np.all(gx.imag < 0)):
        raise NoConvergence(f"subordination left the half-plane at b={bv}", iters)
    res_v = float(np.max(np.abs(gx - gy)))
    res_b = float(np.max(np.abs(1.0 / gx - (omega1 + omega2 - bv))))
    desc = b.descriptor
    return SubordinationResult(b, AlgebraElement(desc, omega1), AlgebraElement(desc, omega2),
                               AlgebraElement(desc, gx), res_v, res_b, iters)


def verify_pick_estimate(samples: Sequence[Tuple[AlgebraElement, AlgebraElement]]) -> float:
    """Largest violation of the Schwarz-Pick type estimate over all sample pairs.

    For every pair ``(z, f(z)), (w, f(w))`` computes

        max_i |f(z)_i - f(w)_i|^2 / (Im f(z)_i Im f(w)_i)
            - max_i |z_i - w_i|^2 / (Im z_i Im w_i)

    which is ``<= 0`` for any analytic self-map of ``H^+(L)``.

    Raises
    ------
    DegenerateSample
        If some ``Im f(z)`` has a nonpositive entry.
    NotInHalfPlane
        If some sample point ``z`` is not in ``H^+(L)``.
    """
    pts = []
    for z, fz in samples:
        zv = np.asarray(getattr(z, "values", z), dtype=complex)
        fv = np.asarray(getattr(fz, "values", fz), dtype=complex)
        if np.any(zv.imag <= 0):
            raise NotInHalfPlane(f"sample point {zv} is not in the upper half-plane")
        if np.any(fv.imag <= 0):
            raise DegenerateSample(f"Im f(z) has a nonpositive entry at z={zv}: {fv}")
        pts.append((zv, fv))
    worst = -np.inf
    for (z, fz), (w, fw) in itertools.combinations(pts, 2):
        lhs = np.max(np.abs(fz - fw) ** 2 / (fz.imag * fw.imag))
        rhs = np.max(np.abs(z - w) ** 2 / (z.imag * w.imag))
        worst = max(worst, float(lhs - rhs))
    return worst


@dataclass(frozen=True)
class GridRow:
    a: float
    y: float
    g: Optional[np.ndarray]
    density: Optional[np.ndarray]
    trace_density: float
    residual_vsubord: float = float("nan")
    residual_bsubord: float = float("nan")
    iterations: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _grid_point(model_x, model_y, a, y, tol):
    b = model_x.descriptor.scalar(complex(a, y))
    try:
        res = solve_subordination(model_x, model_y, b, tol=tol)
    except (NoConvergence, NotInHalfPlane) as exc:
        return GridRow(float(a), float(y), None, None, float("nan"), error=str(exc))
    dens = res.density
    tr = float(np.dot(model_x.descriptor.weight_array, dens))
    return GridRow(float(a), float(y), res.g_sum.values, dens, tr,
                   res.residual_vsubord, res.residual_bsubord, res.iterations)


def grid_convolve(model_x: DistributionModel, model_y: DistributionModel,
                  grid: Iterable[float], y: float, tol: float = DEFAULT_TOL,
                  executor=None) -> List[GridRow]:
    """Density of ``X + Y`` along ``a + iy`` by Stieltjes inversion.

    One :class:`GridRow` per grid point, in grid order.  Points where the
    solver fails are returned with ``error`` set instead of raising.
    ``executor`` (a ``concurrent.futures`` executor) evaluates points in
    parallel when given.
    """
    if not (np.isfinite(y) and y > 0):
        raise ValueError(f"y must be positive, got {y}")
    check_compatible(model_x, model_y)
    grid = [float(a) for a in grid]
    if executor is None:
        return [_grid_point(model_x, model_y, a, y, tol) for a in grid]
    return list(executor.map(lambda a: _grid_point(model_x, model_y, a, y, tol), grid))


def grid_csv_header(dim: int) -> List[str]:
    cols = ["a", "y"]
    for i in range(dim):
        cols += [f"re_g_{i}", f"im_g_{i}"]
    return cols + ["trace_density"]


def grid_csv_rows(rows: Sequence[GridRow], dim: int) -> List[list]:
    out = []
    for r in rows:
        if r.ok:
            vals = [v for gi in r.g for v in (gi.real, gi.imag)]
        else:
            vals = [float("nan")] * (2 * dim)
        out.append([r.a, r.y, *vals, r.trace_density])
    return out
