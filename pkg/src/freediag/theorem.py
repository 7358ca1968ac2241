"""Invariant projections of ``X + Y`` at a real level ``a``.

Given models of ``X`` and ``Y`` and a level ``a`` at which ``X + Y`` has an
atom (``E[p] != 0``), the checker assembles the boundary profile and tests:

1. ``ker(sqrt(varpi1_im) X sqrt(varpi1_im) - varpi1_re)`` is strictly larger
   than ``ker varpi1_im``;
2. the same statement for ``Y`` and the second subordination function;
3. ``E[ker_1] + E[ker_2] >= E[p] + xi`` with
   ``4E[p]/(4E[p]+1) <= xi <= 1``, with equality and ``xi = 1`` once every
   entry of ``E[p]`` is positive.

Kernels are measured through their ``E``-images: the mass of the atom at 0
of ``T = cXc - r``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .algebra import AlgebraElement, trace
from .boundary import (KERNEL_LADDER, KERNEL_THRESHOLD, BoundaryProfile, LadderParams,
                       atom_mass, atom_mass_from, boundary_profile, build_ladder, cauchy_ladder)
from .errors import InconsistentProfile, LadderFailure
from .models import DEFAULT_TOL, DistributionModel, ScalarAtomic, check_compatible, congruence_shift

ATOM_THRESHOLD = 1e-4


@dataclass(frozen=True)
class TheoremTolerances:
    atom_threshold: float = ATOM_THRESHOLD
    item_slack: float = 1e-4
    equality_slack: float = 1e-3
    equality_min_mass: float = 0.01
    consistency_slack: float = 1e-6
    kernel_threshold: float = KERNEL_THRESHOLD


@dataclass(frozen=True)
class Verdict:
    passed: Optional[bool]
    defect: Optional[float]
    slack: float

    def to_dict(self):
        return {"pass": self.passed, "defect": self.defect, "slack": self.slack}


def kernel_mass(model: DistributionModel, c, r,
                params: LadderParams = KERNEL_LADDER) -> AlgebraElement:
    """``E[ker(c X c - r)]``: the atom at 0 of the congruence-shifted model.

    Parameters
    ----------
    model : DistributionModel
    c : AlgebraElement or array_like
        Nonnegative element of ``L``.
    r : AlgebraElement or array_like
        Selfadjoint element of ``L``.
    params : LadderParams
        Ladder used at level 0.  The default stops at ``y ~ 1e-6`` so that a
        kernel shifted by the extrapolation error of ``r`` is still captured.
    """
    t = congruence_shift(model, c, r)
    ys, g = cauchy_ladder(t, 0.0, params)
    mass, _ = atom_mass_from(ys, g)
    return AlgebraElement(model.descriptor, mass)


@dataclass(frozen=True)
class TheoremReport:
    a: float
    profile: BoundaryProfile
    atom_detected: bool
    kernel_mass_1: Optional[AlgebraElement] = None
    kernel_mass_2: Optional[AlgebraElement] = None
    ker_varpi_1: Optional[AlgebraElement] = None
    ker_varpi_2: Optional[AlgebraElement] = None
    item1_defect: Optional[float] = None
    item2_defect: Optional[float] = None
    item3_lhs: Optional[AlgebraElement] = None
    item3_rhs: Optional[AlgebraElement] = None
    equality_case_applicable: bool = False
    equality_case_pass: Optional[bool] = None
    verdicts: Dict[str, Verdict] = field(default_factory=dict)
    diagnostics: Tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        """All evaluated items passed (vacuously true when no atom is detected)."""
        ok = all(v.passed is not False for v in self.verdicts.values())
        return ok and self.equality_case_pass is not False

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else [float(v) for v in np.real(x.values)]

        p = self.profile
        return {
            "a": self.a,
            "atom_detected": self.atom_detected,
            "E_p": arr(p.mass_E_p),
            "varpi_im_1": arr(p.varpi_im_1),
            "varpi_im_2": arr(p.varpi_im_2),
            "varpi_re_1": arr(p.varpi_re_1),
            "varpi_re_2": arr(p.varpi_re_2),
            "xi": arr(p.xi),
            "kernel_mass_1": arr(self.kernel_mass_1),
            "kernel_mass_2": arr(self.kernel_mass_2),
            "ker_varpi_1": arr(self.ker_varpi_1),
            "ker_varpi_2": arr(self.ker_varpi_2),
            "item1": self.verdicts["item1"].to_dict(),
            "item2": self.verdicts["item2"].to_dict(),
            "item3": self.verdicts["item3"].to_dict(),
            "equality_case": {"applicable": self.equality_case_applicable,
                              "pass": self.equality_case_pass},
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), allow_nan=False, **kw)


def _kernel_inputs(varpi_im: AlgebraElement, varpi_re: AlgebraElement, threshold: float):
    """``(c, r, ker)`` with ``c = sqrt(varpi_im)``; both vanish exactly on ``ker varpi_im``."""
    v = varpi_im.values.real
    ker = v <= threshold
    c = np.where(ker, 0.0, np.sqrt(np.clip(v, 0.0, None)))
    r = np.where(ker, 0.0, varpi_re.values.real)
    d = varpi_im.descriptor
    return AlgebraElement(d, c), AlgebraElement(d, r), AlgebraElement(d, ker.astype(float))


def check_invariant_projection(model_x: DistributionModel, model_y: DistributionModel, a: float,
                               tolerances: TheoremTolerances = TheoremTolerances(),
                               ladder_params: LadderParams = LadderParams(),
                               kernel_params: LadderParams = KERNEL_LADDER,
                               tol: float = DEFAULT_TOL) -> TheoremReport:
    """Test the invariant-projection statements for ``X + Y`` at level ``a``.

    Raises
    ------
    LadderFailure
        If the subordination ladder at ``a`` cannot be completed.
    InconsistentProfile
        If ``E[p]`` exceeds ``varpi_im_j`` by more than the consistency slack.
    """
    check_compatible(model_x, model_y)
    tl = tolerances
    ladder = build_ladder(model_x, model_y, a, ladder_params, tol=tol)
    prof = boundary_profile(ladder)
    ep = prof.mass_E_p.values.real
    mass = float(trace(prof.mass_E_p).real)
    diags: List[str] = []
    for j, v in ((1, prof.varpi_im_1), (2, prof.varpi_im_2)):
        excess = ep - v.values.real
        if np.any(excess > tl.consistency_slack):
            raise InconsistentProfile(
                f"E[p] exceeds varpi_im_{j} at a={a} by {excess.max():.3g}: "
                f"E[p]={ep.tolist()}, varpi_im_{j}={v.values.real.tolist()}")
    for name, ok in prof.convergence_flags.items():
        if not np.all(ok):
            diags.append(f"{name} did not settle along the ladder in coordinates "
                         f"{np.flatnonzero(~ok).tolist()}")

    if mass <= tl.atom_threshold:
        diags.insert(0, "no invariant projection detected")
        skipped = {k: Verdict(None, None, tl.item_slack) for k in ("item1", "item2", "item3")}
        return TheoremReport(float(a), prof, False, verdicts=skipped, diagnostics=tuple(diags))

    d = model_x.descriptor
    w = d.weight_array
    c1, r1, k1 = _kernel_inputs(prof.varpi_im_1, prof.varpi_re_1, tl.kernel_threshold)
    c2, r2, k2 = _kernel_inputs(prof.varpi_im_2, prof.varpi_re_2, tl.kernel_threshold)
    km1 = kernel_mass(model_x, c1, r1, kernel_params)
    km2 = kernel_mass(model_y, c2, r2, kernel_params)

    def1 = float(np.dot(w, km1.values.real - k1.values.real))
    def2 = float(np.dot(w, km2.values.real - k2.values.real))
    lhs = km1 + km2
    rhs = prof.mass_E_p + prof.xi
    gap = lhs.values.real - rhs.values.real
    verdicts = {
        "item1": Verdict(def1 > tl.atom_threshold, def1, tl.atom_threshold),
        "item2": Verdict(def2 > tl.atom_threshold, def2, tl.atom_threshold),
        "item3": Verdict(bool(np.all(gap >= -tl.item_slack)), float(gap.min()), tl.item_slack),
    }
    for j, km, kv in ((1, km1, k1), (2, km2, k2)):
        short = kv.values.real - km.values.real
        if np.any(short > tl.consistency_slack):
            diags.append(f"kernel_mass_{j} falls below ker varpi_im_{j} by {short.max():.3g}")

    xi = prof.xi.values.real
    lower = 4 * ep / (4 * ep + 1)
    if np.any(xi < lower - tl.consistency_slack) or np.any(xi > 1 + tl.consistency_slack):
        diags.append(f"xi={xi.tolist()} outside [4E[p]/(4E[p]+1), 1]={lower.tolist()}")

    applicable = bool(ep.min() > tl.equality_min_mass)
    eq_pass = None
    if applicable:
        eq_pass = bool(np.all(np.abs(gap) <= tl.equality_slack)
                       and np.all(np.abs(xi - 1) <= tl.equality_slack))

    for j, kv in ((1, k1), (2, k2)):
        if np.any(kv.values.real > 0):
            diags.append(
                f"varpi_im_{j} vanishes in coordinates {np.flatnonzero(kv.values.real).tolist()} "
                f"while E[p] has trace {mass:.6g}: an algebraic relation ties the "
                f"corresponding spectral projection of {'X' if j == 1 else 'Y'} to p there")

    return TheoremReport(float(a), prof, True, km1, km2, k1, k2, def1, def2, lhs, rhs,
                         applicable, eq_pass, verdicts, tuple(diags))


def _atom_lookup(atoms, t: float) -> float:
    if isinstance(atoms, ScalarAtomic):
        atoms = zip(atoms.locations, atoms.masses)
    return float(sum(m for loc, m in atoms if abs(loc - t) <= 1e-12 * max(1.0, abs(t))))


def bv_scalar_oracle(atoms_x, atoms_y, a1: float, a2: float) -> float:
    """Mass of the atom of ``mu boxplus nu`` at ``a1 + a2`` predicted from
    ``mu({a1})`` and ``nu({a2})``: ``max(mu({a1}) + nu({a2}) - 1, 0)``.

    ``atoms_x``/``atoms_y`` are :class:`ScalarAtomic` models or sequences of
    ``(location, mass)`` pairs.
    """
    return max(_atom_lookup(atoms_x, a1) + _atom_lookup(atoms_y, a2) - 1.0, 0.0)


def auto_candidates(model_x: DistributionModel, model_y: DistributionModel) -> List[float]:
    """Pairwise sums of per-coordinate atom candidates, sorted and deduplicated."""
    cx, cy = model_x.atom_candidates(), model_y.atom_candidates()
    levels = set()
    for sx, sy in zip(cx, cy):
        levels.update(round(s + t, 12) + 0.0 for s in sx for t in sy)
    return sorted(levels)


def atom_scan(model_x: DistributionModel, model_y: DistributionModel,
              candidates: Union[str, Iterable[float]] = "auto",
              threshold: float = ATOM_THRESHOLD,
              ladder_params: LadderParams = LadderParams(),
              executor=None, return_all: bool = False) -> List[Tuple[float, float]]:
    """Levels carrying an atom of ``X + Y`` among ``candidates``.

    Returns ``(a, trace E[p])`` pairs with mass above ``threshold`` (every
    candidate when ``return_all``), sorted by mass descending.  Candidates
    whose ladder fails are skipped with a warning.
    """
    check_compatible(model_x, model_y)
    cands = auto_candidates(model_x, model_y) if isinstance(candidates, str) and \
        candidates == "auto" else [float(a) for a in candidates]

    def one(a):
        try:
            lad = build_ladder(model_x, model_y, a, ladder_params)
        except LadderFailure as exc:
            return a, None, str(exc)
        return a, float(trace(atom_mass(lad)).real), None

    results = list(executor.map(one, cands)) if executor is not None else [one(a) for a in cands]
    out = []
    for a, m, err in results:
        if err is not None:
            warnings.warn(f"atom scan skipped a={a}: {err}", RuntimeWarning, stacklevel=2)
        elif return_all or m > threshold:
            out.append((a, m))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out
