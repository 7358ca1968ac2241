"""Random-matrix validation of the subordination predictions.

Matrices of size ``N`` are split into ``d`` consecutive index blocks; the
conditional expectation onto ``L`` becomes the per-block average of the
resolvent diagonal.

Random numbers: every trial uses its own ``numpy.random.Generator`` over the
counter-based Philox bit generator, keyed by
``SeedSequence(seed, spawn_key=(1, trial))``.  The fixed base matrix of the
permutation-conjugated ensemble uses ``spawn_key=(0,)``.  Gaussian variates
come from ``Generator.standard_normal`` (ziggurat transform), uniform
permutations from ``Generator.permutation``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .algebra import AlgebraDescriptor, AlgebraElement, as_element, require_upper
from .errors import InvalidSpec, LinearSolveFailure
from .models import (DiagonalElement, DistributionModel, ScalarAtomic, ScalarSemicircle,
                     SemicircularProfile, check_compatible)
from .output import write_csv
from .subordination import solve_subordination

ATOM_WINDOW_FLOOR = 1e-3


@dataclass(frozen=True)
class DeterministicDiagonal:
    """Constant value ``x[k]`` on block ``k``."""

    x: Tuple[float, ...]


@dataclass(frozen=True)
class BlockWigner:
    """Symmetric Gaussian matrix with ``Var(M_ij) = S[k, l] / N_l`` for ``i`` in
    block ``k`` and ``j`` in block ``l`` (``N_l`` the size of block ``l``), plus
    the diagonal ``shift``.  Its block-averaged resolvent solves the Dyson
    equation with kernel ``S``."""

    S: Tuple[Tuple[float, ...], ...]
    shift: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class PermutationConjugated:
    """``P^T M0 P`` for a uniform random permutation ``P``.

    ``M0 = O diag(lambda) O^T`` where ``lambda`` repeats each atom location in
    proportion to its mass and ``O`` is a Haar orthogonal matrix fixed by the
    seed.  With ``rotate=False`` the base matrix is ``diag(lambda)`` itself.
    """

    atoms: Tuple[Tuple[float, float], ...]
    rotate: bool = True


Variant = Union[DeterministicDiagonal, BlockWigner, PermutationConjugated]


def block_sizes_for(weights: Sequence[float], N: int) -> Tuple[int, ...]:
    """Largest-remainder rounding of ``N * weights`` with every block at least 1."""
    w = np.asarray(weights, float)
    if N < w.size:
        raise InvalidSpec(f"N={N} is smaller than the number of blocks {w.size}")
    raw = w * N
    sizes = np.maximum(np.floor(raw).astype(int), 1)
    while sizes.sum() < N:
        sizes[np.argmax(raw - sizes)] += 1
    while sizes.sum() > N:
        k = np.argmax(np.where(sizes > 1, sizes - raw, -np.inf))
        sizes[k] -= 1
    return tuple(int(s) for s in sizes)


@dataclass(frozen=True)
class EnsembleSpec:
    N: int
    block_sizes: Tuple[int, ...]
    variant: Variant
    seed: int = 0
    trials: int = 1

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        object.__setattr__(self, "block_sizes", sizes)
        if int(self.N) != self.N or self.N < 1:
            raise InvalidSpec(f"N must be a positive integer, got {self.N!r}")
        if any(s < 1 for s in sizes) or sum(sizes) != self.N:
            raise InvalidSpec(f"block sizes {sizes} must be positive and sum to N={self.N}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidSpec(f"trials must be a positive integer, got {self.trials!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        d = len(sizes)
        v = self.variant
        if isinstance(v, DeterministicDiagonal):
            if len(v.x) != d:
                raise InvalidSpec(f"diagonal variant needs {d} values, got {len(v.x)}")
        elif isinstance(v, BlockWigner):
            S = np.asarray(v.S, float)
            if S.shape != (d, d) or np.any(S < 0) or not np.all(np.isfinite(S)):
                raise InvalidSpec(f"BlockWigner profile must be a nonnegative {d}x{d} matrix")
            var = S / np.asarray(sizes, float)[None, :]
            # block rounding may perturb N_k S_kl = N_l S_lk by O(1/N_k)
            if not np.allclose(var, var.T, rtol=2.0 / min(sizes), atol=1e-15):
                raise InvalidSpec("BlockWigner profile must satisfy w_k S_kl = w_l S_lk "
                                  "so that the matrix can be symmetric")
            if v.shift is not None and len(v.shift) != d:
                raise InvalidSpec(f"BlockWigner shift needs {d} values")
        elif isinstance(v, PermutationConjugated):
            masses = np.array([m for _, m in v.atoms], float)
            if masses.size == 0 or np.any(masses <= 0) or abs(masses.sum() - 1) > 1e-12:
                raise InvalidSpec("atoms must have positive masses summing to 1")
        else:
            raise InvalidSpec(f"unknown ensemble variant {type(v).__name__}")

    @property
    def block_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.block_sizes)), self.block_sizes)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def _spectrum(atoms, N):
    locs = np.array([t for t, _ in atoms], float)
    counts = np.asarray(block_sizes_for([m for _, m in atoms], N)) if len(atoms) <= N else None
    if counts is None:
        raise InvalidSpec("more atoms than matrix size")
    return np.repeat(locs, counts)


def haar_orthogonal(N: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((N, N)))
    return q * np.sign(np.diag(r))


def base_matrix(spec: EnsembleSpec) -> np.ndarray:
    """The fixed matrix ``M0`` of a permutation-conjugated ensemble."""
    v = spec.variant
    if not isinstance(v, PermutationConjugated):
        raise InvalidSpec("base_matrix applies to PermutationConjugated ensembles only")
    lam = _spectrum(v.atoms, spec.N)
    if not v.rotate:
        return np.diag(lam)
    O = haar_orthogonal(spec.N, _rng(spec.seed, 0))
    M0 = (O * lam) @ O.T
    return 0.5 * (M0 + M0.T)


def sample_matrix(spec: EnsembleSpec, trial_index: int, base: Optional[np.ndarray] = None) -> np.ndarray:
    """Real symmetric ``N x N`` sample number ``trial_index`` of ``spec``.

    ``base`` may pass a precomputed :func:`base_matrix` to avoid rebuilding it.
    """
    if not 0 <= trial_index:
        raise InvalidSpec(f"trial index must be nonnegative, got {trial_index}")
    v = spec.variant
    blk = spec.block_index
    if isinstance(v, DeterministicDiagonal):
        return np.diag(np.asarray(v.x, float)[blk])
    rng = _rng(spec.seed, 1, trial_index)
    if isinstance(v, BlockWigner):
        N = spec.N
        sizes = np.asarray(spec.block_sizes, float)
        var = np.asarray(v.S, float) / sizes[None, :]
        var = 0.5 * (var + var.T)
        z = np.triu(rng.standard_normal((N, N)))
        z = z + np.triu(z, 1).T
        M = z * np.sqrt(var[np.ix_(blk, blk)])
        if v.shift is not None:
            M[np.diag_indices(N)] += np.asarray(v.shift, float)[blk]
        return M
    M0 = base_matrix(spec) if base is None else base
    p = rng.permutation(spec.N)
    return M0[np.ix_(p, p)]


def empirical_cauchy(M: np.ndarray, b, block_sizes: Sequence[int]) -> AlgebraElement:
    """Per-block average of the diagonal of ``(B - M)^{-1}``, ``B`` carrying ``b_k`` on block ``k``.

    Raises
    ------
    NotInHalfPlane
    LinearSolveFailure
    """
    sizes = tuple(int(s) for s in block_sizes)
    desc = AlgebraDescriptor(len(sizes), tuple(np.asarray(sizes) / sum(sizes)))
    b = as_element(desc, getattr(b, "values", b))
    require_upper(b)
    M = np.asarray(M, float)
    blk = np.repeat(np.arange(len(sizes)), sizes)
    A = np.diag(b.values[blk]) - M
    try:
        diag = np.diag(np.linalg.inv(A))
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(f"resolvent solve failed: {exc}") from exc
    if not np.all(np.isfinite(diag)):
        raise LinearSolveFailure("resolvent has non-finite entries")
    g = np.add.reduceat(diag, np.concatenate(([0], np.cumsum(sizes)[:-1]))) / np.asarray(sizes)
    return AlgebraElement(desc, g)


def spectral_weights(eigenvectors: np.ndarray, block_sizes: Sequence[int]) -> np.ndarray:
    """``W[k, n]``: average over block ``k`` of ``|v_n(i)|^2``; shape ``(d, N)``."""
    return kernels.block_average_rows(np.abs(eigenvectors) ** 2, np.asarray(block_sizes))


def empirical_cauchy_scalar(eigenvalues: np.ndarray, weights: np.ndarray, z: complex) -> np.ndarray:
    """Block-averaged resolvent at the scalar point ``z`` from a spectral decomposition."""
    return weights @ (1.0 / (z - eigenvalues))


def empirical_atom_mass(eigenvalues: np.ndarray, eigenvectors: np.ndarray,
                        block_sizes: Sequence[int], a: float,
                        window: Optional[float] = None) -> np.ndarray:
    """Per-block spectral mass of ``M`` within ``|lambda - a| <= window``.

    ``window`` defaults to ``max(1e-3, 10/N)``.
    """
    lam = np.asarray(eigenvalues, float)
    if window is None:
        window = max(ATOM_WINDOW_FLOOR, 10.0 / lam.size)
    if not window > 0:
        raise ValueError("window must be positive")
    sel = np.abs(lam - a) <= window
    W = spectral_weights(np.asarray(eigenvectors)[:, sel], block_sizes)
    return np.clip(W.sum(axis=1), 0.0, 1.0)


@dataclass(frozen=True)
class EmpiricalComparison:
    points: Tuple[complex, ...]
    predicted: np.ndarray          # (P, d)
    empirical_mean: np.ndarray     # (P, d)
    stderr: np.ndarray             # (P, d)
    discrepancy: np.ndarray        # (P,)
    trials: int = 0

    @property
    def sup_discrepancy(self) -> float:
        return float(np.max(self.discrepancy))

    def csv_header(self) -> List[str]:
        d = self.predicted.shape[1]
        cols = ["a", "y"]
        cols += [f"{p}_{i}" for i in range(d) for p in ("pred_re", "pred_im")]
        cols += [f"{p}_{i}" for i in range(d) for p in ("emp_re", "emp_im")]
        cols += [f"stderr_{i}" for i in range(d)]
        return cols + ["discrepancy"]

    def csv_rows(self) -> List[list]:
        rows = []
        for k, z in enumerate(self.points):
            row = [z.real, z.imag]
            row += [v for g in self.predicted[k] for v in (g.real, g.imag)]
            row += [v for g in self.empirical_mean[k] for v in (g.real, g.imag)]
            row += list(self.stderr[k]) + [self.discrepancy[k]]
            rows.append(row)
        return rows

    def write_csv(self, path) -> None:
        write_csv(path, self.csv_header(), self.csv_rows())


def ensemble_for_model(model: DistributionModel, N: int, seed: int = 0,
                       trials: int = 1) -> EnsembleSpec:
    """The random-matrix ensemble whose block-averaged resolvent approximates ``model``."""
    sizes = block_sizes_for(model.descriptor.weights, N)
    if isinstance(model, DiagonalElement):
        variant = DeterministicDiagonal(tuple(model.x))
    elif isinstance(model, SemicircularProfile):
        variant = BlockWigner(tuple(map(tuple, model.S)), tuple(model.shift))
    elif isinstance(model, ScalarSemicircle):
        variant = BlockWigner(((model.variance,),))
    elif isinstance(model, ScalarAtomic):
        variant = PermutationConjugated(tuple(zip(model.locations, model.masses)))
    else:
        raise InvalidSpec(f"no ensemble for {type(model).__name__}")
    return EnsembleSpec(N, sizes, variant, seed, trials)


def _trial_spectrum(spec_x, spec_y, t, base_x, base_y):
    M = sample_matrix(spec_x, t, base_x) + sample_matrix(spec_y, t, base_y)
    lam, V = np.linalg.eigh(M)
    return lam, spectral_weights(V, spec_x.block_sizes)


def validate(model_x: DistributionModel, model_y: DistributionModel,
             spec_x: EnsembleSpec, spec_y: EnsembleSpec,
             grid: Sequence[float], y: float, executor=None) -> EmpiricalComparison:
    """Compare ``E[(a + iy - M_x - M_y)^{-1}]`` averaged over trials with the
    subordination prediction for ``X + Y`` at each grid point.

    Trial ``t`` pairs sample ``t`` of ``spec_x`` with sample ``t`` of
    ``spec_y``; the two specs should use different seeds.  ``executor``
    evaluates trials in parallel; the reduction is in trial order.
    """
    check_compatible(model_x, model_y)
    if spec_x.block_sizes != spec_y.block_sizes or spec_x.trials != spec_y.trials:
        raise InvalidSpec("X and Y ensembles must share N, block sizes and trial count")
    if len(spec_x.block_sizes) != model_x.dim:
        raise InvalidSpec(f"ensemble has {len(spec_x.block_sizes)} blocks, model dim is {model_x.dim}")
    if not y > 0:
        raise ValueError("y must be positive")
    pts = tuple(complex(a, y) for a in grid)
    desc = model_x.descriptor
    pred = np.array([solve_subordination(model_x, model_y, desc.scalar(z)).g_sum.values
                     for z in pts])

    base_x = base_matrix(spec_x) if isinstance(spec_x.variant, PermutationConjugated) else None
    base_y = base_matrix(spec_y) if isinstance(spec_y.variant, PermutationConjugated) else None

    def one(t):
        lam, W = _trial_spectrum(spec_x, spec_y, t, base_x, base_y)
        return np.array([empirical_cauchy_scalar(lam, W, z) for z in pts])

    trials = range(spec_x.trials)
    samples = np.array(list(executor.map(one, trials)) if executor is not None
                       else [one(t) for t in trials])
    mean = samples.mean(axis=0)
    T = samples.shape[0]
    if T > 1:
        var = samples.real.var(axis=0, ddof=1) + samples.imag.var(axis=0, ddof=1)
        stderr = np.sqrt(var / T)
    else:
        stderr = np.zeros(mean.shape)
    disc = np.max(np.abs(mean - pred), axis=1)
    return EmpiricalComparison(pts, pred, mean, stderr, disc, T)


def empirical_atom_mass_of_sum(spec_x: EnsembleSpec, spec_y: EnsembleSpec, a: float,
                               trial_index: int = 0, window: Optional[float] = None) -> np.ndarray:
    """Per-block atom mass at ``a`` of one sample of ``M_x + M_y``."""
    M = sample_matrix(spec_x, trial_index) + sample_matrix(spec_y, trial_index)
    lam, V = np.linalg.eigh(M)
    return empirical_atom_mass(lam, V, spec_x.block_sizes, a, window)
