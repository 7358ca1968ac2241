"""Vertical boundary limits at a real point ``a``.

Quantities are sampled along ``a + iy`` on a geometric ladder
``y_k = y0 * rho**k`` and extrapolated to ``y = 0``:

* atom mass ``E[p] = lim -y Im G_{X+Y}(a + iy)``
* ``varpi_im_j = lim y / Im omega_j(a + iy)`` (monotone in ``y``)
* ``varpi_re_j = lim y Re omega_j(a + iy) / Im omega_j(a + iy)``
* ``xi = lim (Im G)^2 / ((Re G)^2 + (Im G)^2)``
* Julia-Caratheodory derivatives ``lim Im omega_j(a + iy) / y``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .algebra import AlgebraDescriptor, AlgebraElement
from .errors import LadderFailure, MonotonicityViolation, NoConvergence, NonMonotoneWarning
from .models import DEFAULT_TOL, DistributionModel, cauchy, check_compatible
from .subordination import solve_subordination

N_FIT = 8
MONOTONE_SLACK = 1e-9
SPREAD_TOL = 1e-4
JC_INFINITE = 1e9
KERNEL_THRESHOLD = 1e-6


@dataclass(frozen=True)
class LadderParams:
    y0: float = 1.0
    rho: float = 0.5
    K: int = 45

    def __post_init__(self):
        if not (self.y0 > 0 and 0 < self.rho < 1 and int(self.K) == self.K and self.K >= 2):
            raise ValueError(f"invalid ladder parameters {self}")

    @property
    def ys(self) -> np.ndarray:
        return self.y0 * self.rho ** np.arange(self.K)


# Ladder used to measure kernels of cXc - r: its floor matches the accuracy of
# the extrapolated boundary values that build c and r.
KERNEL_LADDER = LadderParams(y0=1e-2, rho=0.5, K=14)


@dataclass(frozen=True)
class YLadder:
    """Per-rung records of ``omega1, omega2, g_sum`` (arrays of shape ``(K, d)``)."""

    a: float
    ys: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    g_sum: np.ndarray
    residual_im: np.ndarray
    descriptor: AlgebraDescriptor

    @property
    def usable(self) -> np.ndarray:
        """Rungs whose achieved accuracy (imaginary part of the ``1/G`` identity)
        is within ``0.1 y``."""
        return self.residual_im <= 0.1 * self.ys

    def omega(self, which: int) -> np.ndarray:
        if which not in (1, 2):
            raise ValueError("which must be 1 or 2")
        return self.omega1 if which == 1 else self.omega2


def build_ladder(model_x: DistributionModel, model_y: DistributionModel, a: float,
                 params: LadderParams = LadderParams(), tol: float = DEFAULT_TOL) -> YLadder:
    """Solve the subordination problem at every rung ``a + i y_k``.

    Rungs are solved in order of decreasing ``y`` with each one warm-started
    from the previous ``omega2``.

    Raises
    ------
    LadderFailure
        When the solver fails at some rung; ``rung`` names it.
    """
    check_compatible(model_x, model_y)
    desc = model_x.descriptor
    ys = params.ys
    d = desc.dim
    om1 = np.empty((ys.size, d), complex)
    om2 = np.empty((ys.size, d), complex)
    gs = np.empty((ys.size, d), complex)
    res = np.empty(ys.size)
    w = None
    for k, y in enumerate(ys):
        b = np.full(d, complex(a, y))
        try:
            r = solve_subordination(model_x, model_y, b, tol=tol, w0=w)
        except NoConvergence as exc:
            raise LadderFailure(f"ladder at a={a} failed at rung {k} (y={y:.3g}): {exc}",
                                rung=k) from exc
        w = r.omega2.values
        om1[k], om2[k], gs[k] = r.omega1.values, w, r.g_sum.values
        res[k] = np.max(np.abs((1.0 / gs[k] - (om1[k] + om2[k] - b)).imag))
    for arr in (om1, om2, gs, res):
        arr.setflags(write=False)
    return YLadder(float(a), ys, om1, om2, gs, res, desc)


def cauchy_ladder(model: DistributionModel, a: float,
                  params: LadderParams = KERNEL_LADDER) -> Tuple[np.ndarray, np.ndarray]:
    """``(ys, G_X(a + i y_k))`` for a single model."""
    ys = params.ys
    g = np.array([cauchy(model, model.descriptor.scalar(complex(a, y))).g.values for y in ys])
    return ys, g


# --------------------------------------------------------------------------
# Extrapolation helpers
# --------------------------------------------------------------------------

def affine_extrapolate(ys: np.ndarray, values: np.ndarray,
                       n_fit: int = N_FIT) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares fit ``v(y) = v0 + c y`` on the ``n_fit`` smallest ``y``.

    ``values`` has shape ``(K, d)``.  Returns ``(v0, rms_residual)`` per column.
    """
    ys = np.asarray(ys, float)
    values = np.asarray(values, float)
    idx = np.argsort(ys)[:n_fit]
    yk, vk = ys[idx], values[idx]
    A = np.column_stack([np.ones_like(yk), yk])
    coef, *_ = np.linalg.lstsq(A, vk, rcond=None)
    resid = vk - A @ coef
    return coef[0], np.sqrt(np.mean(resid ** 2, axis=0))


def richardson(ys: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Eliminate the linear term using the two smallest rungs."""
    idx = np.argsort(ys)[:2]
    y1, y2 = ys[idx[1]], ys[idx[0]]
    v1, v2 = values[idx[1]], values[idx[0]]
    return (y1 * v2 - y2 * v1) / (y1 - y2)


def tail_spread(values: np.ndarray, ys: np.ndarray, n: int = N_FIT) -> np.ndarray:
    idx = np.argsort(ys)[:n]
    v = values[idx]
    return v.max(axis=0) - v.min(axis=0)


def check_monotone(values: np.ndarray, increasing: bool, slack: float = MONOTONE_SLACK,
                   what: str = "sequence") -> None:
    """Require ``values`` (rows ordered by decreasing ``y``) to be monotone per column.

    ``slack`` is relative: a step may go the wrong way by at most
    ``slack * max(1, |v|)``.
    """
    v = np.asarray(values, float)
    diff = np.diff(v, axis=0)
    if not increasing:
        diff = -diff
    allowed = slack * np.maximum(1.0, np.abs(v[:-1]))
    bad = diff < -allowed
    if np.any(bad):
        k, i = map(int, np.argwhere(bad)[0])
        raise MonotonicityViolation(
            f"{what} is not {'non-decreasing' if increasing else 'non-increasing'} "
            f"as y decreases: coordinate {i}, rungs {k}->{k + 1}: {v[k, i]!r} -> {v[k + 1, i]!r}")


def _eventually_monotone(v: np.ndarray, n: int = N_FIT) -> np.ndarray:
    tail = np.diff(v[-n:], axis=0)
    scale = 1e-9 * np.maximum(1.0, np.abs(v[-n:]).max(axis=0))
    return np.all(tail >= -scale, axis=0) | np.all(tail <= scale, axis=0)


def _usable(ladder: YLadder):
    mask = ladder.usable
    if mask.sum() < 2:
        raise LadderFailure(f"ladder at a={ladder.a} has fewer than two usable rungs")
    return mask


# --------------------------------------------------------------------------
# Limits
# --------------------------------------------------------------------------

def atom_mass_from(ys: np.ndarray, g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Extrapolated ``lim -y Im g(a + iy)`` clamped to ``[0, 1]``, and the fit residual."""
    seq = -ys[:, None] * g.imag
    mono = _eventually_monotone(seq)
    if not np.all(mono):
        warnings.warn(f"atom-mass sequence is not eventually monotone in coordinates "
                      f"{np.flatnonzero(~mono).tolist()}", NonMonotoneWarning, stacklevel=3)
    v0, resid = affine_extrapolate(ys, seq)
    return np.clip(v0, 0.0, 1.0), resid


def atom_mass(ladder: YLadder) -> AlgebraElement:
    """``E[p]``: the L-valued mass of the spectral projection of ``X + Y`` at ``a``."""
    mask = _usable(ladder)
    v, _ = atom_mass_from(ladder.ys[mask], ladder.g_sum[mask])
    return AlgebraElement(ladder.descriptor, v)


def varpi_im(ladder: YLadder, which: int = 1) -> AlgebraElement:
    """``lim y / Im omega_j(a + iy)``; entries in ``[0, 1]``.

    Raises
    ------
    MonotonicityViolation
        If the sequence increases anywhere along the ladder as ``y`` decreases.
    """
    mask = _usable(ladder)
    ys = ladder.ys[mask]
    seq = ys[:, None] / ladder.omega(which)[mask].imag
    check_monotone(seq, increasing=False, what=f"y/Im omega{which}")
    return AlgebraElement(ladder.descriptor, np.clip(richardson(ys, seq), 0.0, 1.0))


def varpi_re(ladder: YLadder, which: int = 1) -> Tuple[AlgebraElement, np.ndarray]:
    """``lim y Re omega_j / Im omega_j`` and a per-entry convergence flag."""
    mask = _usable(ladder)
    ys = ladder.ys[mask]
    om = ladder.omega(which)[mask]
    seq = ys[:, None] * om.real / om.imag
    v0, _ = affine_extrapolate(ys, seq)
    ok = tail_spread(seq, ys) <= SPREAD_TOL * (1.0 + np.abs(v0))
    return AlgebraElement(ladder.descriptor, v0), ok


def xi_ratio(ys: np.ndarray, g: np.ndarray) -> np.ndarray:
    yi = ys[:, None] * g.imag
    yr = ys[:, None] * g.real
    return yi ** 2 / (yr ** 2 + yi ** 2)


def xi_limit(ladder: YLadder) -> Tuple[AlgebraElement, np.ndarray]:
    """``lim (Im G)^2 / |G|^2`` along the ladder and a per-entry convergence flag."""
    mask = _usable(ladder)
    ys = ladder.ys[mask]
    seq = xi_ratio(ys, ladder.g_sum[mask])
    v0, _ = affine_extrapolate(ys, seq)
    v0 = np.clip(v0, 0.0, 1.0)
    ok = tail_spread(seq, ys) <= SPREAD_TOL * (1.0 + np.abs(v0))
    return AlgebraElement(ladder.descriptor, v0), ok


def jc_derivative(ladder: YLadder, which: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """``lim Im omega_j(a + iy) / y``.

    Returns ``(values, infinite)``; entries whose last rung exceeds ``1e9`` are
    flagged infinite and reported as ``inf``.
    """
    mask = _usable(ladder)
    ys = ladder.ys[mask]
    seq = ladder.omega(which)[mask].imag / ys[:, None]
    check_monotone(seq, increasing=True, what=f"Im omega{which}/y")
    last = seq[np.argmin(ys)]
    infinite = last > JC_INFINITE
    val = np.where(infinite, np.inf, np.maximum(richardson(ys, seq), 1.0))
    return val, infinite


def kernel_projection(varpi: AlgebraElement, threshold: float = KERNEL_THRESHOLD) -> AlgebraElement:
    """Projection of ``L`` onto the coordinates where ``varpi`` vanishes."""
    return AlgebraElement(varpi.descriptor, (varpi.values.real <= threshold).astype(float))


@dataclass(frozen=True)
class BoundaryProfile:
    a: float
    mass_E_p: AlgebraElement
    varpi_im_1: AlgebraElement
    varpi_im_2: AlgebraElement
    varpi_re_1: AlgebraElement
    varpi_re_2: AlgebraElement
    xi: AlgebraElement
    jc_derivative_1: np.ndarray
    jc_derivative_2: np.ndarray
    jc_infinite_1: np.ndarray
    jc_infinite_2: np.ndarray
    convergence_flags: Dict[str, np.ndarray] = field(default_factory=dict)


def boundary_profile(ladder: YLadder) -> BoundaryProfile:
    """All boundary limits at ``ladder.a``."""
    vre1, ok1 = varpi_re(ladder, 1)
    vre2, ok2 = varpi_re(ladder, 2)
    xi, okx = xi_limit(ladder)
    jc1, inf1 = jc_derivative(ladder, 1)
    jc2, inf2 = jc_derivative(ladder, 2)
    flags = {"varpi_re_1": ok1, "varpi_re_2": ok2, "xi": okx}
    return BoundaryProfile(ladder.a, atom_mass(ladder), varpi_im(ladder, 1), varpi_im(ladder, 2),
                           vre1, vre2, xi, jc1, jc2, inf1, inf2, flags)


def ladder_csv_header(dim: int):
    cols = ["y"]
    for name in ("omega1", "omega2", "g_sum"):
        for i in range(dim):
            cols += [f"re_{name}_{i}", f"im_{name}_{i}"]
    return cols


def ladder_csv_rows(ladder: YLadder):
    rows = []
    for k, y in enumerate(ladder.ys):
        row = [float(y)]
        for arr in (ladder.omega1, ladder.omega2, ladder.g_sum):
            for v in arr[k]:
                row += [v.real, v.imag]
        rows.append(row)
    return rows


def boundary_invariant_violations(ladder: YLadder, profile: BoundaryProfile,
                                  slack: float = 1e-6) -> list:
    """Human-readable list of violated boundary invariants (empty when all hold).

    Checks ``E[p] <= varpi_im_j``, ``4E[p]/(4E[p]+1) <= xi <= 1``, bounded
    ``|Re omega_1| sqrt(y / Im omega_1)`` over the five smallest usable rungs
    (growth at most 1%) and, when every entry of ``E[p]`` exceeds 0.01,
    ``Re omega_1 + Re omega_2 -> a`` within 1e-5.
    """
    out = []
    ep = profile.mass_E_p.values.real
    for j, v in ((1, profile.varpi_im_1), (2, profile.varpi_im_2)):
        if np.any(ep > v.values.real + slack):
            out.append(f"E[p] exceeds varpi_im_{j}: {ep} > {v.values.real}")
    xi = profile.xi.values.real
    lo = 4 * ep / (4 * ep + 1)
    if np.any(xi < lo - slack) or np.any(xi > 1 + slack):
        out.append(f"xi outside [4E[p]/(4E[p]+1), 1]: xi={xi}, lower={lo}")
    mask = ladder.usable
    ys = ladder.ys[mask]
    om1 = ladder.omega1[mask]
    bound = np.abs(om1.real) * np.sqrt(ys[:, None] / om1.imag)
    tail = bound[-5:]
    if np.any(tail.max(axis=0) > 1.01 * tail[0] + 1e-12):
        out.append(f"|Re omega_1| sqrt(y/Im omega_1) grows along the last rungs: {tail[:, :].tolist()}")
    if ep.min() > 0.01:
        s0, _ = affine_extrapolate(ys, (om1 + ladder.omega2[mask]).real)
        if np.any(np.abs(s0 - ladder.a) > 1e-5):
            out.append(f"Re omega_1 + Re omega_2 tends to {s0}, not a={ladder.a}")
    return out
