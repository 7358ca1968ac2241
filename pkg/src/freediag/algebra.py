"""The commutative tracial algebra ``L = C^d``.

Elements of ``L`` are d-tuples of complex numbers with entrywise
multiplication; the trace is the weighted sum ``sum_i w_i x_i``.  Everything
here is immutable so values can be shared freely between worker threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import InvalidDescriptor, NotInHalfPlane, NotPositive, SingularElement

ALGEBRAIC_TOL = 1e-12
ANALYTIC_TOL = 1e-6
SINGULAR_FLOOR = 1e-300

Scalar = Union[int, float, complex]


@dataclass(frozen=True)
class AlgebraDescriptor:
    """Dimension and trace weights of ``L = C^d``.

    Parameters
    ----------
    dim : int
        Number of minimal projections of ``L``.
    weights : tuple of float
        Trace of each minimal projection; positive and summing to one.
    """

    dim: int
    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidDescriptor(f"dim must be a positive integer, got {self.dim!r}")
        if len(w) != self.dim:
            raise InvalidDescriptor(f"expected {self.dim} weights, got {len(w)}")
        if not all(np.isfinite(v) and v > 0 for v in w):
            raise InvalidDescriptor(f"weights must be positive, got {w}")
        if abs(sum(w) - 1.0) > ALGEBRAIC_TOL:
            raise InvalidDescriptor(f"weights must sum to 1, got sum {sum(w)!r}")

    @classmethod
    def uniform(cls, dim: int) -> "AlgebraDescriptor":
        return cls(dim, (1.0 / dim,) * dim)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def element(self, values) -> "AlgebraElement":
        return AlgebraElement(self, values)

    def unit(self) -> "AlgebraElement":
        return AlgebraElement(self, np.ones(self.dim))

    def zero(self) -> "AlgebraElement":
        return AlgebraElement(self, np.zeros(self.dim))

    def scalar(self, z: Scalar) -> "AlgebraElement":
        return AlgebraElement(self, np.full(self.dim, z, dtype=complex))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """An element of ``L``: a read-only complex d-vector tied to a descriptor."""

    descriptor: AlgebraDescriptor
    values: np.ndarray = field(repr=True)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex).reshape(-1)
        if v.shape != (self.descriptor.dim,):
            raise InvalidDescriptor(
                f"element has {v.size} entries but algebra has dim {self.descriptor.dim}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"algebra element has non-finite entries: {v}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.descriptor.dim

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, AlgebraElement):
            if other.descriptor != self.descriptor:
                raise InvalidDescriptor("elements belong to different algebras")
            return other.values
        return np.asarray(other, dtype=complex)

    def _new(self, values) -> "AlgebraElement":
        return AlgebraElement(self.descriptor, values)

    def __add__(self, other):
        return self._new(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self._new(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self._new(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * invert(other) if isinstance(other, AlgebraElement) \
            else self._new(self.values / other)

    def __neg__(self):
        return self._new(-self.values)

    def conj(self) -> "AlgebraElement":
        return self._new(self.values.conj())

    def __eq__(self, other):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.descriptor == other.descriptor and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.descriptor, self.values.tobytes()))

    def allclose(self, other, atol=ALGEBRAIC_TOL, rtol=0.0) -> bool:
        return bool(np.allclose(self.values, self._coerce(other), atol=atol, rtol=rtol))

    def is_selfadjoint(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.values.imag) <= tol))

    def tolist(self) -> list:
        return self.values.tolist()


def as_element(descriptor: AlgebraDescriptor, x) -> AlgebraElement:
    """Wrap ``x`` (element, scalar or sequence) as an element of ``descriptor``."""
    if isinstance(x, AlgebraElement):
        if x.descriptor != descriptor:
            raise InvalidDescriptor("element belongs to a different algebra")
        return x
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 0:
        arr = np.full(descriptor.dim, arr)
    return AlgebraElement(descriptor, arr)


def trace(x: AlgebraElement) -> complex:
    """Weighted trace ``sum_i w_i x_i``; returned as a float when ``x`` is selfadjoint."""
    t = complex(np.dot(x.descriptor.weight_array, x.values))
    return t.real if x.is_selfadjoint() else t


def re(x: AlgebraElement) -> AlgebraElement:
    return x._new(x.values.real)


def im(x: AlgebraElement) -> AlgebraElement:
    return x._new(x.values.imag)


def invert(x: AlgebraElement) -> AlgebraElement:
    """Entrywise reciprocal.

    Raises
    ------
    SingularElement
        If some entry has modulus below 1e-300.
    """
    if np.any(np.abs(x.values) < SINGULAR_FLOOR):
        raise SingularElement(f"cannot invert element with a (near-)zero entry: {x.values}")
    return x._new(1.0 / x.values)


def sqrt_positive(x: AlgebraElement, tol: float = ALGEBRAIC_TOL) -> AlgebraElement:
    """Entrywise nonnegative square root of a positive element.

    Entries in ``[-tol, 0)`` are clamped to zero; anything more negative, or
    with an imaginary part beyond ``tol``, raises :class:`NotPositive`.
    """
    v = x.values
    if np.any(np.abs(v.imag) > tol) or np.any(v.real < -tol):
        raise NotPositive(f"element is not nonnegative: {v}")
    return x._new(np.sqrt(np.clip(v.real, 0.0, None)))


def sup_norm(x: AlgebraElement) -> float:
    """The C*-norm of ``L``: largest entry modulus."""
    return float(np.max(np.abs(x.values)))


def in_upper_half_plane(x: AlgebraElement) -> bool:
    return bool(np.all(x.values.imag > 0))


def is_nonnegative(x: AlgebraElement, tol: float = ALGEBRAIC_TOL) -> bool:
    v = x.values
    return bool(np.all(np.abs(v.imag) <= tol) and np.all(v.real >= -tol))


def projection(descriptor: AlgebraDescriptor, mask: Sequence[bool]) -> AlgebraElement:
    """The projection of ``L`` onto the coordinates where ``mask`` is true."""
    return AlgebraElement(descriptor, np.asarray(mask, dtype=float))


def require_upper(x: AlgebraElement, name: str = "b") -> AlgebraElement:
    """Return ``x`` unchanged if it lies in ``H^+(L)``, else raise :class:`NotInHalfPlane`."""
    if not in_upper_half_plane(x):
        raise NotInHalfPlane(f"{name} must have all imaginary parts > 0, got {x.values}")
    return x
