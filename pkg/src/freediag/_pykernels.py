"""Pure-Python/numpy implementations of the inner loops.

These mirror ``_ckernels.pyx`` one for one and are used whenever the compiled
extension is unavailable (or when ``FREEDIAG_PURE_PYTHON=1``).

Convergence test shared by every loop: with ``d = F(x) - x`` the undamped
defect, stop once ``|Re d_i| <= tol * (1 + |x_i|)`` and
``|Im d_i| <= tol * |Im x_i|`` for all ``i``.  The relative test on imaginary
parts keeps ``Im`` accurate when it is many orders smaller than ``Re``.
"""
import numpy as np


def _converged(d, x, tol):
    return bool(np.all(np.abs(d.real) <= tol * (1.0 + np.abs(x)))
                and np.all(np.abs(d.imag) <= tol * np.abs(x.imag)))


def dyson_damped(S, b0, g0, theta, tol, max_iter):
    """Damped iteration ``g <- (1-theta) g + theta / (b0 - S g)``.

    Returns
    -------
    g : ndarray of complex
    iterations : int
    converged : bool
    """
    S = np.asarray(S, dtype=float)
    b0 = np.asarray(b0, dtype=complex)
    g = np.array(g0, dtype=complex)
    for it in range(1, max_iter + 1):
        f = 1.0 / (b0 - S @ g)
        d = f - g
        if not np.all(np.isfinite(d)):
            return g, it, False
        if _converged(d, g, tol):
            return f, it, True
        g = g + theta * d
    return g, max_iter, False


def atomic_cauchy(w, locations, masses):
    """Cauchy transform of a finitely supported measure and its derivative at ``w``."""
    r = 1.0 / (w - np.asarray(locations, dtype=float))
    m = np.asarray(masses, dtype=float)
    return complex(np.dot(m, r)), complex(-np.dot(m, r * r))


def _atomic_h(w, loc, mass):
    r = 1.0 / (w - loc)
    G = np.dot(mass, r)
    dG = -np.dot(mass, r * r)
    return 1.0 / G - w, -dG / (G * G) - 1.0


def _scaled(d, w):
    return max(abs(d.real) / (1.0 + abs(w)), abs(d.imag) / abs(w.imag))


def atomic_subordination(b, loc_x, mass_x, loc_y, mass_y, w0, theta, tol, max_iter,
                         stall_limit=50):
    """Fixed point of ``w -> b + h_X(b + h_Y(w))`` for two atomic scalar laws.

    ``h(w) = 1/G(w) - w``.  Each step tries a Newton update on ``w - F(w)`` and
    keeps it when it stays in the upper half-plane and lowers the scaled
    defect; otherwise it takes the damped step ``w + theta (F(w) - w)``.  The
    loop also stops once the defect has not improved for ``stall_limit``
    steps.

    Returns
    -------
    w : complex
        ``F(w)`` on convergence, else the best iterate seen.
    iterations : int
    converged : bool
    defect : float
        Scaled defect at the returned point (before the final ``F``).
    """
    loc_x = np.asarray(loc_x, dtype=float)
    mass_x = np.asarray(mass_x, dtype=float)
    loc_y = np.asarray(loc_y, dtype=float)
    mass_y = np.asarray(mass_y, dtype=float)

    def F(w):
        hy, dhy = _atomic_h(w, loc_y, mass_y)
        u = b + hy
        hx, dhx = _atomic_h(u, loc_x, mass_x)
        return b + hx, dhx * dhy

    w = complex(w0)
    f, j = F(w)
    best_w, best_err, stall = w, np.inf, 0
    for it in range(1, max_iter + 1):
        d = f - w
        if not (np.isfinite(d.real) and np.isfinite(d.imag)):
            return complex(best_w), it, False, float(best_err)
        err = _scaled(d, w)
        if abs(d.real) <= tol * (1.0 + abs(w)) and abs(d.imag) <= tol * abs(w.imag):
            return complex(f), it, True, float(err)
        if err < best_err:
            if err < best_err * (1.0 - 1e-3):
                stall = 0
            best_w, best_err = w, err
        else:
            stall += 1
        if stall > stall_limit:
            return complex(best_w), it, False, float(best_err)
        accepted = False
        if j != 1.0:
            cand = w + d / (1.0 - j)
            if cand.imag > 0 and np.isfinite(cand.real) and np.isfinite(cand.imag):
                fc, jc = F(cand)
                if _scaled(fc - cand, cand) < err:
                    w, f, j = cand, fc, jc
                    accepted = True
        if not accepted:
            w = w + theta * d
            f, j = F(w)
    return complex(best_w), max_iter, False, float(best_err)


def block_average_rows(weights, block_sizes):
    """Average the rows of ``weights`` over consecutive blocks of the given sizes.

    Returns an array of shape ``(len(block_sizes), weights.shape[1])``.
    """
    weights = np.asarray(weights, dtype=float)
    sizes = np.asarray(block_sizes, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    return np.add.reduceat(weights, offsets, axis=0) / sizes[:, None]
