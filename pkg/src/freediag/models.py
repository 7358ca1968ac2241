"""Distribution models with a computable L-valued Cauchy transform.

Each model describes a selfadjoint element ``X`` free over ``L = C^d`` and
evaluates ``G_X(b) = E[(b - X)^{-1}]`` on ``H^+(L)``.  Besides the public
:func:`cauchy`, models expose ``_evaluate`` which also returns the auxiliary
map ``h(w) = 1/G(w) - w`` and its Jacobian; the subordination solver uses it
for Newton steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .algebra import (ALGEBRAIC_TOL, AlgebraDescriptor, AlgebraElement, as_element,
                      require_upper, sup_norm)
from .errors import (DimensionMismatch, InvalidModel, NoConvergence, NotPositive,
                     NotSelfadjoint)

DYSON_THETA = 0.5
DYSON_MAX_ITER = 100_000
DEFAULT_TOL = 1e-12
# Damped sweeps tried before switching to safeguarded Newton steps.
DAMPED_PHASE = 200
STALL_LIMIT = 50
NEAR_AXIS = 1e-9


def _scaled_defect(d: np.ndarray, x: np.ndarray) -> float:
    """Largest defect measured in the units of the shared convergence test."""
    re_part = np.abs(d.real) / (1.0 + np.abs(x))
    im_part = np.abs(d.imag) / np.maximum(np.abs(x.imag), 1e-300)
    return float(max(re_part.max(), im_part.max()))


def _relative_defect(g: np.ndarray, f: np.ndarray) -> float:
    return float(np.max(np.abs(g - f) / np.maximum(1.0, np.abs(g))))


# --------------------------------------------------------------------------
# Dyson equation
# --------------------------------------------------------------------------

def _dyson(S: np.ndarray, b0: np.ndarray, tol: float = DEFAULT_TOL,
           max_iter: int = DYSON_MAX_ITER, g0: Optional[np.ndarray] = None,
           theta: float = DYSON_THETA) -> Tuple[np.ndarray, int, float]:
    """Solve ``g = 1/(b0 - S g)`` with ``Im g < 0``.

    Returns ``(g, iterations, defect)`` where ``defect`` is the relative
    sup-norm defect, recomputed after the loop.
    """
    d = b0.size
    if g0 is None or np.any(np.asarray(g0).imag >= 0):
        g0 = 1.0 / b0
    if not S.any():
        g = 1.0 / b0
        return g, 1, _relative_defect(g, 1.0 / (b0 - S @ g))
    g, iters, ok = kernels.dyson_damped(S, b0, np.asarray(g0, dtype=complex), theta, tol,
                                        min(DAMPED_PHASE, max_iter))
    eye = np.eye(d)
    best_g, best_err, stall = g, np.inf, 0
    while not ok and iters < max_iter and stall <= STALL_LIMIT:
        f = 1.0 / (b0 - S @ g)
        r = g - f
        if not np.all(np.isfinite(r)):
            raise NoConvergence("Dyson iteration produced NaN", iterations=iters)
        err = _scaled_defect(r, g)
        if err < best_err:
            stall = 0 if err < best_err * (1 - 1e-3) else stall + 1
            best_g, best_err = g, err
        else:
            stall += 1
        try:
            step = np.linalg.solve(eye - (f * f)[:, None] * S, r)
        except np.linalg.LinAlgError:
            step = None
        accepted = False
        if step is not None and np.all(np.isfinite(step)):
            lam = 1.0
            for _ in range(30):
                cand = g - lam * step
                if np.all(cand.imag < 0):
                    fc = 1.0 / (b0 - S @ cand)
                    if _scaled_defect(fc - cand, cand) < err:
                        g, accepted = cand, True
                        break
                lam *= 0.5
        iters += 1
        if not accepted:
            g, n, ok = kernels.dyson_damped(S, b0, g, theta, tol,
                                            max(1, min(DAMPED_PHASE, max_iter - iters)))
            iters += n
            continue
        f = 1.0 / (b0 - S @ g)
        ok = kernels.converged(f - g, g, tol)
        if ok:
            g = f
    if not ok:
        # Near the real axis the strict tolerance may be out of reach.
        relaxed = tol * max(1.0, NEAR_AXIS / float(np.min(b0.imag)))
        g = best_g if best_err < np.inf else g
        err = _scaled_defect(1.0 / (b0 - S @ g) - g, g)
        if not err <= relaxed:
            raise NoConvergence(f"Dyson iteration did not reach tol={tol} "
                                f"(defect {err:.3g} after {iters} iterations)",
                                iterations=iters, residual=err)
    defect = _relative_defect(g, 1.0 / (b0 - S @ g))
    return g, iters, defect


def dyson_solve(S, b0: AlgebraElement, tol: float = DEFAULT_TOL,
                max_iter: int = DYSON_MAX_ITER, g0=None) -> AlgebraElement:
    """Cauchy transform of the operator-valued semicircular element with profile ``S``.

    Solves ``g_i = 1 / (b0_i - sum_j S_ij g_j)`` by the damped iteration
    ``g <- (1 - theta) g + theta / (b0 - S g)`` (``theta = 0.5``), switching to
    safeguarded Newton steps when the damped sweep is slow.

    Parameters
    ----------
    S : (d, d) array_like
        Nonnegative covariance kernel.
    b0 : AlgebraElement
        Point of ``H^+(L)``.
    tol : float
        Convergence tolerance (relative for imaginary parts).
    max_iter : int
    g0 : array_like, optional
        Starting point in ``H^-(L)``; defaults to ``1/b0``.

    Raises
    ------
    NoConvergence
    NotInHalfPlane
    """
    require_upper(b0, "b0")
    S = _check_kernel(S, b0.dim)
    g, _, _ = _dyson(S, b0.values, tol, max_iter,
                     None if g0 is None else np.asarray(getattr(g0, "values", g0), complex))
    return AlgebraElement(b0.descriptor, g)


def _check_kernel(S, d: int) -> np.ndarray:
    S = np.array(S, dtype=float)
    if S.shape != (d, d):
        raise InvalidModel(f"covariance must be {d}x{d}, got shape {S.shape}")
    if not np.all(np.isfinite(S)) or np.any(S < 0):
        raise InvalidModel("covariance kernel must be finite and entrywise nonnegative")
    S.setflags(write=False)
    return S


# --------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CauchyValue:
    b: AlgebraElement
    g: AlgebraElement
    iterations: int
    residual: float


class DistributionModel:
    """Base class of the model variants; see the concrete subclasses."""

    kind: str = ""
    descriptor: AlgebraDescriptor

    @property
    def dim(self) -> int:
        return self.descriptor.dim

    def _evaluate(self, w: np.ndarray, hint=None, jac: bool = False):
        """Return ``(g, h, J, hint)`` at ``w``: Cauchy transform, ``1/g - w``,
        the Jacobian ``dh/dw`` (or ``None``) and a warm-start hint."""
        raise NotImplementedError

    def norm_bound(self) -> float:
        raise NotImplementedError

    def atom_candidates(self):
        """Per-coordinate sets of values where this element may carry an atom."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _real_tuple(values, d, what):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (d,):
        raise InvalidModel(f"{what} must have {d} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidModel(f"{what} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiagonalElement(DistributionModel):
    """An element of ``L`` itself, ``X = diag(x)``."""

    descriptor: AlgebraDescriptor
    x: np.ndarray
    kind = "diagonal"

    def __post_init__(self):
        object.__setattr__(self, "x", _real_tuple(self.x, self.descriptor.dim, "x"))

    def _evaluate(self, w, hint=None, jac=False):
        g = 1.0 / (w - self.x)
        h = -self.x.astype(complex)
        return g, h, (np.zeros((w.size, w.size), complex) if jac else None), None

    def norm_bound(self):
        return float(np.max(np.abs(self.x)))

    def atom_candidates(self):
        return [{float(v)} for v in self.x]

    def to_dict(self):
        return {"dim": self.dim, "weights": list(self.descriptor.weights),
                "type": "diagonal", "x": self.x.tolist()}


@dataclass(frozen=True, eq=False)
class SemicircularProfile(DistributionModel):
    """Operator-valued semicircular element with covariance ``eta(l)_i = sum_j S_ij l_j``
    plus an optional shift by ``shift`` in ``L``."""

    descriptor: AlgebraDescriptor
    S: np.ndarray
    shift: Optional[np.ndarray] = None
    kind = "semicircular_profile"

    def __post_init__(self):
        d = self.descriptor.dim
        object.__setattr__(self, "S", _check_kernel(self.S, d))
        shift = np.zeros(d) if self.shift is None else self.shift
        object.__setattr__(self, "shift", _real_tuple(shift, d, "shift"))

    def _evaluate(self, w, hint=None, jac=False):
        g, _, _ = _dyson(self.S, w - self.shift, g0=hint)
        h = -self.shift - self.S @ g
        J = None
        if jac:
            D = g * g
            # dh/dw = S (I - D S)^{-1} D
            J = self.S @ np.linalg.solve(np.eye(w.size) - D[:, None] * self.S, np.diag(D))
        return g, h, J, g

    def norm_bound(self):
        return float(np.max(np.abs(self.shift)) + 2.0 * np.sqrt(np.max(self.S.sum(axis=1))))

    def atom_candidates(self):
        zero = (~self.S.any(axis=1)) & (~self.S.any(axis=0))
        return [{float(s)} if z else set() for s, z in zip(self.shift, zero)]

    def to_dict(self):
        return {"dim": self.dim, "weights": list(self.descriptor.weights),
                "type": "semicircular_profile", "S": self.S.tolist(),
                "shift": self.shift.tolist()}


def _scalar_descriptor(descriptor):
    if descriptor is None:
        return AlgebraDescriptor(1, (1.0,))
    if descriptor.dim != 1:
        raise InvalidModel("scalar models require dim = 1")
    return descriptor


@dataclass(frozen=True, eq=False)
class ScalarAtomic(DistributionModel):
    """Finitely supported scalar law ``sum_k m_k delta_{t_k}`` (``d = 1`` only)."""

    locations: np.ndarray
    masses: np.ndarray
    descriptor: AlgebraDescriptor = field(default=None)
    kind = "scalar_atomic"

    def __post_init__(self):
        object.__setattr__(self, "descriptor", _scalar_descriptor(self.descriptor))
        t = np.array(self.locations, dtype=float).reshape(-1)
        m = np.array(self.masses, dtype=float).reshape(-1)
        if t.size == 0 or t.shape != m.shape:
            raise InvalidModel("locations and masses must be nonempty and of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(m))):
            raise InvalidModel("locations and masses must be finite")
        if np.any(m <= 0) or abs(m.sum() - 1.0) > ALGEBRAIC_TOL:
            raise InvalidModel(f"masses must be positive and sum to 1, got {m.tolist()}")
        if np.any(np.diff(t) <= 0):
            raise InvalidModel("locations must be strictly increasing")
        t.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "locations", t)
        object.__setattr__(self, "masses", m)

    def _evaluate(self, w, hint=None, jac=False):
        G, dG = kernels.atomic_cauchy(complex(w[0]), self.locations, self.masses)
        g = np.array([G])
        h = 1.0 / g - w
        J = np.array([[-dG / (G * G) - 1.0]]) if jac else None
        return g, h, J, None

    def norm_bound(self):
        return float(np.max(np.abs(self.locations)))

    def atom_candidates(self):
        return [set(float(t) for t in self.locations)]

    def to_dict(self):
        return {"dim": 1, "weights": [1.0], "type": "scalar_atomic",
                "atoms": [[float(t), float(m)] for t, m in zip(self.locations, self.masses)]}


def semicircle_cauchy(z, variance):
    """Closed-form Cauchy transform of the centred semicircle.

    Of the two roots of ``variance g^2 - z g + 1 = 0`` this returns the one in
    the lower half-plane, written as ``2 / (z + sqrt(z - 2s) sqrt(z + 2s))``
    so that its imaginary part keeps full relative precision near the axis.
    """
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(variance)
    g = 2.0 / (z + np.sqrt(z - 2.0 * s) * np.sqrt(z + 2.0 * s))
    if np.any(g.imag >= 0):
        raise ArithmeticError(f"semicircle branch selection failed at z={z}")
    return g


@dataclass(frozen=True, eq=False)
class ScalarSemicircle(DistributionModel):
    """Centred semicircle law of the given variance (``d = 1`` only)."""

    variance: float
    descriptor: AlgebraDescriptor = field(default=None)
    kind = "scalar_semicircle"

    def __post_init__(self):
        object.__setattr__(self, "descriptor", _scalar_descriptor(self.descriptor))
        v = float(self.variance)
        if not (np.isfinite(v) and v > 0):
            raise InvalidModel("variance must be positive")
        object.__setattr__(self, "variance", v)

    def _evaluate(self, w, hint=None, jac=False):
        g = semicircle_cauchy(w, self.variance)
        h = -self.variance * g
        J = None
        if jac:
            dg = -g * g / (1.0 - self.variance * g * g)
            J = np.array([[-self.variance * dg[0]]])
        return g, h, J, None

    def norm_bound(self):
        return 2.0 * np.sqrt(self.variance)

    def atom_candidates(self):
        return [set()]

    def to_dict(self):
        return {"dim": 1, "weights": [1.0], "type": "scalar_semicircle",
                "variance": self.variance}


# --------------------------------------------------------------------------
# Public operations
# --------------------------------------------------------------------------

def cauchy(model: DistributionModel, b: AlgebraElement) -> CauchyValue:
    """Evaluate ``G_X(b) = E[(b - X)^{-1}]`` for ``b`` in ``H^+(L)``."""
    b = as_element(model.descriptor, b)
    require_upper(b)
    if isinstance(model, SemicircularProfile):
        g, iters, defect = _dyson(model.S, b.values - model.shift)
    else:
        g = model._evaluate(b.values)[0]
        iters, defect = 0, 0.0
    if not np.all(g.imag < 0):
        raise NoConvergence(f"Cauchy transform left the lower half-plane: {g}", iters, defect)
    return CauchyValue(b, AlgebraElement(model.descriptor, g), iters, defect)


def h_transform(model: DistributionModel, w: AlgebraElement) -> AlgebraElement:
    """``h(w) = 1/G(w) - w``; maps ``H^+(L)`` into its closure."""
    w = as_element(model.descriptor, w)
    require_upper(w, "w")
    return AlgebraElement(model.descriptor, model._evaluate(w.values)[1])


def norm_bound(model: DistributionModel) -> float:
    return model.norm_bound()


def congruence_shift(model: DistributionModel, c, r) -> DistributionModel:
    """Model of ``c X c - r`` for ``c >= 0`` and ``r`` selfadjoint, both in ``L``.

    Semicircular variants map ``(S, shift)`` to ``(c^2 S c^2, c^2 shift - r)``;
    a scalar semicircle becomes a one-dimensional profile.
    """
    d = model.descriptor
    c = as_element(d, c)
    r = as_element(d, r)
    if np.any(np.abs(c.values.imag) > ALGEBRAIC_TOL) or np.any(c.values.real < -ALGEBRAIC_TOL):
        raise NotPositive(f"c must be nonnegative, got {c.values}")
    if np.any(np.abs(r.values.imag) > ALGEBRAIC_TOL):
        raise NotSelfadjoint(f"r must be selfadjoint, got {r.values}")
    c2 = np.clip(c.values.real, 0.0, None) ** 2
    rr = r.values.real
    if isinstance(model, DiagonalElement):
        return DiagonalElement(d, c2 * model.x - rr)
    if isinstance(model, SemicircularProfile):
        return SemicircularProfile(d, c2[:, None] * model.S * c2[None, :],
                                   c2 * model.shift - rr)
    if isinstance(model, ScalarSemicircle):
        return SemicircularProfile(d, [[c2[0] ** 2 * model.variance]], [-rr[0]])
    if isinstance(model, ScalarAtomic):
        if c2[0] == 0.0:
            return DiagonalElement(d, [-rr[0]])
        return ScalarAtomic(c2[0] * model.locations - rr[0], model.masses, d)
    raise InvalidModel(f"congruence_shift does not support {type(model).__name__}")


# --------------------------------------------------------------------------
# JSON model files
# --------------------------------------------------------------------------

MODEL_TYPES = ("diagonal", "semicircular_profile", "scalar_atomic", "scalar_semicircle")


def model_from_dict(doc: dict) -> DistributionModel:
    """Build a model from the JSON document layout used by the CLI.

    ``{"dim": d, "weights": [...], "type": <kind>, ...}`` with type-specific
    fields ``x`` (diagonal), ``S`` and optional ``shift`` (semicircular_profile),
    ``atoms`` as ``[[t, m], ...]`` (scalar_atomic) or ``variance``
    (scalar_semicircle).
    """
    try:
        kind = doc["type"]
        descriptor = AlgebraDescriptor(int(doc["dim"]), tuple(doc["weights"]))
        if kind == "diagonal":
            return DiagonalElement(descriptor, doc["x"])
        if kind == "semicircular_profile":
            return SemicircularProfile(descriptor, doc["S"], doc.get("shift"))
        if kind == "scalar_atomic":
            atoms = np.asarray(doc["atoms"], dtype=float).reshape(-1, 2)
            return ScalarAtomic(atoms[:, 0], atoms[:, 1], descriptor)
        if kind == "scalar_semicircle":
            return ScalarSemicircle(doc["variance"], descriptor)
    except KeyError as exc:
        raise InvalidModel(f"model document is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModel):
            raise
        raise InvalidModel(f"malformed model document: {exc}") from None
    raise InvalidModel(f"unknown model type {kind!r}; expected one of {MODEL_TYPES}")


def load_model(path) -> DistributionModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidModel(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InvalidModel(f"{path}: expected a JSON object")
    return model_from_dict(doc)


def save_model(model: DistributionModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def check_compatible(model_x: DistributionModel, model_y: DistributionModel) -> None:
    """Raise :class:`DimensionMismatch` unless both models live over the same ``L``."""
    dx, dy = model_x.descriptor, model_y.descriptor
    if dx.dim != dy.dim:
        raise DimensionMismatch(f"models have different dims: {dx.dim} and {dy.dim}")
    if not np.allclose(dx.weights, dy.weights, atol=ALGEBRAIC_TOL, rtol=0):
        raise DimensionMismatch(f"models have different weights: {dx.weights} and {dy.weights}")


__all__ = [
    "CauchyValue", "DistributionModel", "DiagonalElement", "SemicircularProfile",
    "ScalarAtomic", "ScalarSemicircle", "cauchy", "dyson_solve", "h_transform", "norm_bound",
    "congruence_shift", "semicircle_cauchy", "model_from_dict", "load_model", "save_model",
    "check_compatible", "sup_norm",
]
