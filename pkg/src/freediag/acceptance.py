"""The acceptance battery run by ``freediag selftest``.

Each criterion is a function returning a :class:`CriterionResult`; files a
criterion produces go to ``outdir``.  Everything written is a deterministic
function of the seed; wall-clock times are only reported on the console.
"""
from __future__ import annotations

import filecmp
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .algebra import AlgebraDescriptor
from .boundary import (LadderParams, atom_mass, build_ladder, check_monotone, ladder_csv_header,
                       ladder_csv_rows)
from .errors import FreeDiagError, MonotonicityViolation
from .output import write_csv, write_json
from .models import DiagonalElement, ScalarAtomic, ScalarSemicircle, SemicircularProfile
from .montecarlo import EnsembleSpec, ensemble_for_model, empirical_atom_mass_of_sum, validate
from .subordination import solve_subordination, verify_pick_estimate
from .theorem import check_invariant_projection

DEFAULT_SEED = 20240611
GRID = np.linspace(-4.0, 4.0, 21)
GRID_YS = (1.0, 0.1, 0.01)

HALF = AlgebraDescriptor.uniform(2)
SKEW = AlgebraDescriptor(2, (0.3, 0.7))


def bernoulli_pair():
    return ScalarAtomic([0.0, 1.0], [0.75, 0.25]), ScalarAtomic([0.0, 2.0], [0.75, 0.25])


def battery() -> Dict[str, Tuple]:
    """Named model pairs used by the residual, half-plane and monotonicity checks."""
    return {
        "diag+diag": (DiagonalElement(HALF, [0, 1]), DiagonalElement(HALF, [2, 1])),
        "diag+diag skew": (DiagonalElement(SKEW, [-1, 2]), DiagonalElement(SKEW, [0.5, -0.5])),
        "diag+profile": (DiagonalElement(HALF, [0, 5]), SemicircularProfile(HALF, [[1, 0], [0, 0]])),
        "diag+profile skew": (DiagonalElement(SKEW, [-1, 2]),
                              SemicircularProfile(SKEW, [[1, 0.5], [0.5, 2]], [0.5, -1])),
        "profile+diag": (SemicircularProfile(HALF, [[1, 0], [0, 0]]), DiagonalElement(HALF, [0, 5])),
        "profile+profile": (SemicircularProfile(HALF, [[1, 0.5], [0.5, 2]]),
                            SemicircularProfile(HALF, [[0.3, 1], [1, 0.7]])),
        "atomic bernoulli": bernoulli_pair(),
        "atomic skew": (ScalarAtomic([1, 5], [0.9, 0.1]), ScalarAtomic([-1, 2], [0.1, 0.9])),
        "semicircle pair": (ScalarSemicircle(1.0), ScalarSemicircle(1.0)),
    }


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    files: List[str] = field(default_factory=list)

    def line(self) -> str:
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "pass": self.passed,
                "detail": self.detail, "files": self.files}


def _g(x: float) -> str:
    return format(float(x), ".6g")


def criterion_1(outdir, seed, executor=None):
    x, y = bernoulli_pair()
    t0 = time.perf_counter()
    masses = {}
    for a in (0.0, 1.0, 2.0, 3.0):
        lad = build_ladder(x, y, a)
        masses[a] = float(atom_mass(lad).values[0].real)
        if a == 0.0:
            path = os.path.join(outdir, "c1_ladder_a0.csv")
            write_csv(path, ladder_csv_header(1), ladder_csv_rows(lad))
    dt = time.perf_counter() - t0
    ok = abs(masses[0.0] - 0.5) <= 1e-4 and all(masses[a] < 1e-4 for a in (1.0, 2.0, 3.0))
    ok = ok and dt < 5.0
    detail = "mass " + ", ".join(f"a={a:g}: {_g(m)}" for a, m in masses.items())
    return CriterionResult(1, "scalar atom law", ok, detail, dt, ["c1_ladder_a0.csv"])


def _grid_solves(pairs):
    """Solve every pair on the grid; yields ``(name, b, result)``."""
    for name, (x, y) in pairs.items():
        for yy in GRID_YS:
            for a in GRID:
                b = x.descriptor.scalar(complex(a, yy))
                yield name, b, solve_subordination(x, y, b)


def criterion_2(outdir, seed, executor=None):
    pairs = {k: v for k, v in battery().items() if k != "semicircle pair"}
    t0 = time.perf_counter()
    worst, rows = 0.0, []
    for name, b, r in _grid_solves(pairs):
        scale = max(1.0, float(np.max(np.abs(b.values))))
        ratio = max(r.residual_vsubord, r.residual_bsubord) / scale
        worst = max(worst, ratio)
        rows.append([name, b.values[0].real, b.values[0].imag,
                     r.residual_vsubord, r.residual_bsubord])
    dt = time.perf_counter() - t0
    write_csv(os.path.join(outdir, "c2_residuals.csv"),
              ["pair", "a", "y", "residual_vsubord", "residual_bsubord"], rows)
    ok = worst <= 1e-8 and dt < 30.0
    return CriterionResult(2, "subordination residuals", ok,
                           f"max residual/max(1,|b|) = {_g(worst)} over {len(rows)} solves",
                           dt, ["c2_residuals.csv"])


def criterion_3(outdir, seed, executor=None):
    x, y = battery()["semicircle pair"]
    t0 = time.perf_counter()
    r = solve_subordination(x, y, x.descriptor.scalar(1e-7j))
    dens = float(r.density[0])
    target = 1.0 / (np.pi * np.sqrt(2.0))
    worst = 0.0
    for _, b, res in _grid_solves({"semicircle": (x, y)}):
        dev = res.omega1.values - (b.values - res.g_sum.values)
        worst = max(worst, float(np.max(np.abs(dev))))
    ok = abs(dens - target) <= 1e-5 and worst <= 1e-9
    return CriterionResult(3, "semicircle closed form", ok,
                           f"density(0) = {_g(dens)} (target {_g(target)}), "
                           f"max |omega1 - (z - G)| = {_g(worst)}", time.perf_counter() - t0)


def criterion_4(outdir, seed, executor=None):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(4,))))
    t0 = time.perf_counter()
    pairs = battery()
    bigr = np.inf
    for _, b, r in _grid_solves(pairs):
        bigr = min(bigr, float(np.min(r.omega1.values.imag - b.values.imag)),
                   float(np.min(r.omega2.values.imag - b.values.imag)))
    pick = -np.inf
    for x, y in pairs.values():
        d = x.dim
        for _ in range(50):
            pts = [rng.uniform(-3, 3, d) + 1j * np.exp(rng.uniform(np.log(0.05), np.log(2.0), d))
                   for _ in range(2)]
            rs = [solve_subordination(x, y, p) for p in pts]
            bigr = min(bigr, *(float(np.min(w.values.imag - p.imag))
                               for p, r in zip(pts, rs) for w in (r.omega1, r.omega2)))
            for att in ("omega1", "omega2"):
                pick = max(pick, verify_pick_estimate([(p, getattr(r, att)) for p, r in zip(pts, rs)]))
    ok = bigr >= -1e-10 and pick <= 1e-8
    return CriterionResult(4, "half-plane and Pick estimate", ok,
                           f"min(Im omega - Im b) = {_g(bigr)}, max Pick defect = {_g(pick)}",
                           time.perf_counter() - t0)


def criterion_5(outdir, seed, executor=None):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(5,))))
    t0 = time.perf_counter()
    failures, count = [], 0
    for name, (x, y) in battery().items():
        bound = x.norm_bound() + y.norm_bound() + 1.0
        for a in rng.uniform(-bound, bound, 10):
            lad = build_ladder(x, y, float(a))
            m = lad.usable
            ys = lad.ys[m][:, None]
            for j in (1, 2):
                om = lad.omega(j)[m].imag
                try:
                    check_monotone(ys / om, increasing=False, what=f"y/Im omega{j}")
                    check_monotone(om / ys, increasing=True, what=f"Im omega{j}/y")
                except MonotonicityViolation as exc:
                    failures.append(f"{name} a={_g(a)}: {exc}")
            count += 1
    ok = not failures
    detail = f"{count} ladders monotone" if ok else "; ".join(failures[:3])
    return CriterionResult(5, "monotone boundary limits", ok, detail, time.perf_counter() - t0)


def _theorem_files(report, outdir, name):
    path = os.path.join(outdir, name)
    write_json(path, report.to_dict())
    return [name]


def criterion_6(outdir, seed, executor=None):
    t0 = time.perf_counter()
    rep = check_invariant_projection(DiagonalElement(HALF, [0, 1]), DiagonalElement(HALF, [2, 1]), 2.0)
    ep = rep.profile.mass_E_p.values.real
    xi = rep.profile.xi.values.real
    ok = (np.all(np.abs(ep - 1) <= 1e-6) and rep.passed and rep.equality_case_pass is True
          and np.all(np.abs(xi - 1) <= 1e-3))
    return CriterionResult(6, "tautological case", bool(ok),
                           f"E[p] = {[_g(v) for v in ep]}, xi = {[_g(v) for v in xi]}, "
                           f"items {[rep.verdicts[k].passed for k in ('item1', 'item2', 'item3')]}, "
                           f"equality {rep.equality_case_pass}",
                           time.perf_counter() - t0, _theorem_files(rep, outdir, "c6_theorem.json"))


def criterion_7(outdir, seed, executor=None):
    t0 = time.perf_counter()
    rep = check_invariant_projection(SemicircularProfile(HALF, [[1, 0], [0, 0]]),
                                     DiagonalElement(HALF, [0, 5]), 5.0)
    ep = rep.profile.mass_E_p.values.real
    xi = rep.profile.xi.values.real
    lower = 4 * ep / (4 * ep + 1)
    ok = (np.all(np.abs(ep - [0, 1]) <= 1e-3) and rep.atom_detected and rep.passed
          and np.all(xi >= lower - 1e-6) and np.all(xi <= 1 + 1e-6))
    return CriterionResult(7, "mixed case", bool(ok),
                           f"E[p] = {[_g(v) for v in ep]}, xi = {[_g(v) for v in xi]}, "
                           f"items {[rep.verdicts[k].passed for k in ('item1', 'item2', 'item3')]}",
                           time.perf_counter() - t0, _theorem_files(rep, outdir, "c7_theorem.json"))


def criterion_8(outdir, seed, executor=None):
    t0 = time.perf_counter()
    x, y = bernoulli_pair()
    rep = check_invariant_projection(x, y, 0.0)
    gap = abs(rep.verdicts["item3"].defect)
    xi = float(rep.profile.xi.values[0].real)
    k1 = float(rep.kernel_mass_1.values[0].real)
    k2 = float(rep.kernel_mass_2.values[0].real)
    ok = (gap <= 1e-3 and abs(xi - 1) <= 1e-3 and abs(k1 - 0.75) <= 1e-3
          and abs(k2 - 0.75) <= 1e-3)
    return CriterionResult(8, "scalar equality case", ok,
                           f"|lhs - rhs| = {_g(gap)}, xi = {_g(xi)}, kernel masses ({_g(k1)}, {_g(k2)})",
                           time.perf_counter() - t0, _theorem_files(rep, outdir, "c8_theorem.json"))


def mc_specs(seed: int, N: int = 2000, trials: int = 20):
    x = SemicircularProfile(HALF, [[1, 0.5], [0.5, 2]])
    y = SemicircularProfile(HALF, [[0.3, 1], [1, 0.7]])
    return x, y, ensemble_for_model(x, N, seed, trials), ensemble_for_model(y, N, seed + 1, trials)


def criterion_9(outdir, seed, executor=None):
    t0 = time.perf_counter()
    x, y, sx, sy = mc_specs(seed)
    comp = validate(x, y, sx, sy, np.linspace(-3.0, 3.0, 21), 0.05, executor=executor)
    comp.write_csv(os.path.join(outdir, "c9_mc.csv"))
    px, py = SemicircularProfile(HALF, [[1, 0], [0, 0]]), DiagonalElement(HALF, [0, 5])
    mass = empirical_atom_mass_of_sum(ensemble_for_model(px, 2000, seed + 2),
                                      ensemble_for_model(py, 2000, seed + 3), 5.0)
    dt = time.perf_counter() - t0
    ok = comp.sup_discrepancy <= 0.05 and abs(mass[1] - 1) <= 0.02 and dt < 300
    return CriterionResult(9, "Monte Carlo concordance", bool(ok),
                           f"sup discrepancy = {_g(comp.sup_discrepancy)}, "
                           f"block masses at 5 = {[_g(m) for m in mass]}", dt, ["c9_mc.csv"])


CRITERIA: List[Callable] = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                            criterion_6, criterion_7, criterion_8, criterion_9]


def _write_summary(outdir, results):
    write_json(os.path.join(outdir, "acceptance.json"),
               {"criteria": [r.to_dict() for r in results],
                "passed": all(r.passed for r in results)})


def _artifacts(outdir):
    return sorted(f for f in os.listdir(outdir) if f.endswith((".csv", ".json")))


def run_battery(outdir: str, seed: int = DEFAULT_SEED, executor=None,
                report: Optional[Callable[[CriterionResult], None]] = None) -> List[CriterionResult]:
    """Run criteria 1-9 into ``outdir``, then criterion 10 by repeating them in a
    scratch directory and comparing every file byte for byte."""
    os.makedirs(outdir, exist_ok=True)

    def run_all(target, emit):
        out = []
        for fn in CRITERIA:
            try:
                res = fn(target, seed, executor)
            except FreeDiagError as exc:
                n = int(fn.__name__.rsplit("_", 1)[1])
                res = CriterionResult(n, fn.__name__, False, f"{type(exc).__name__}: {exc}")
            out.append(res)
            if emit is not None:
                emit(res)
        _write_summary(target, out)
        return out

    results = run_all(outdir, report)
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as scratch:
        run_all(scratch, None)
        names = _artifacts(outdir)
        same = names == _artifacts(scratch)
        diff = [] if same else ["file lists differ"]
        if same:
            _, mismatch, errors = filecmp.cmpfiles(outdir, scratch, names, shallow=False)
            diff = mismatch + errors
    r10 = CriterionResult(10, "determinism", not diff,
                          f"{len(names)} files byte-identical on rerun" if not diff
                          else f"differing files: {diff}", time.perf_counter() - t0)
    results.append(r10)
    if report is not None:
        report(r10)
    _write_summary(outdir, results)
    return results
