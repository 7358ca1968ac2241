# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; one-for-one with ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite, INFINITY

cnp.import_array()


cdef inline bint _finite(double complex z) nogil:
    return isfinite(z.real) and isfinite(z.imag)


cdef inline double _scaled(double complex d, double complex w) nogil:
    cdef double a = fabs(d.real) / (1.0 + abs(w))
    cdef double b = fabs(d.imag) / fabs(w.imag)
    return a if a > b else b


def dyson_damped(const double[:, ::1] S, const double complex[::1] b0,
                 const double complex[::1] g0, double theta, double tol, long max_iter):
    """Damped iteration ``g <- (1-theta) g + theta / (b0 - S g)``.

    Returns ``(g, iterations, converged)``.
    """
    cdef Py_ssize_t n = b0.shape[0], i, j
    cdef long it
    cdef double complex acc
    cdef bint ok, finite
    g_arr = np.array(g0, dtype=np.complex128)
    f_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] g = g_arr
    cdef double complex[::1] f = f_arr
    with nogil:
        for it in range(1, max_iter + 1):
            ok = True
            finite = True
            for i in range(n):
                acc = b0[i]
                for j in range(n):
                    acc = acc - S[i, j] * g[j]
                f[i] = 1.0 / acc
            for i in range(n):
                acc = f[i] - g[i]
                if not _finite(acc):
                    finite = False
                    break
                if fabs(acc.real) > tol * (1.0 + abs(g[i])) or fabs(acc.imag) > tol * fabs(g[i].imag):
                    ok = False
            if not finite:
                break
            if ok:
                with gil:
                    return f_arr, it, True
            for i in range(n):
                g[i] = g[i] + theta * (f[i] - g[i])
    if not finite:
        return g_arr, it, False
    return g_arr, max_iter, False


cdef inline void _cauchy(double complex w, const double[::1] loc, const double[::1] mass,
                         double complex *G, double complex *dG) nogil:
    cdef Py_ssize_t k
    cdef double complex r
    G[0] = 0
    dG[0] = 0
    for k in range(loc.shape[0]):
        r = 1.0 / (w - loc[k])
        G[0] = G[0] + mass[k] * r
        dG[0] = dG[0] - mass[k] * r * r


def atomic_cauchy(double complex w, locations, masses):
    """Cauchy transform of a finitely supported measure and its derivative at ``w``."""
    cdef const double[::1] loc = np.ascontiguousarray(locations, dtype=np.float64)
    cdef const double[::1] mass = np.ascontiguousarray(masses, dtype=np.float64)
    cdef double complex G, dG
    _cauchy(w, loc, mass, &G, &dG)
    return complex(G), complex(dG)


cdef inline void _h(double complex w, const double[::1] loc, const double[::1] mass,
                    double complex *h, double complex *dh) nogil:
    cdef double complex G, dG
    _cauchy(w, loc, mass, &G, &dG)
    h[0] = 1.0 / G - w
    dh[0] = -dG / (G * G) - 1.0


cdef inline void _F(double complex b, double complex w,
                    const double[::1] loc_x, const double[::1] mass_x,
                    const double[::1] loc_y, const double[::1] mass_y,
                    double complex *f, double complex *j) nogil:
    cdef double complex hy, dhy, hx, dhx
    _h(w, loc_y, mass_y, &hy, &dhy)
    _h(b + hy, loc_x, mass_x, &hx, &dhx)
    f[0] = b + hx
    j[0] = dhx * dhy


def atomic_subordination(double complex b, const double[::1] loc_x, const double[::1] mass_x,
                         const double[::1] loc_y, const double[::1] mass_y,
                         double complex w0, double theta, double tol, long max_iter,
                         long stall_limit=50):
    """Fixed point of ``w -> b + h_X(b + h_Y(w))`` for two atomic scalar laws.

    Returns ``(w, iterations, converged, defect)``; see the Python twin.
    """
    cdef double complex w = w0, f, j, d, cand, fc, jc, best_w = w0
    cdef double err, best_err = INFINITY
    cdef long it, stall = 0
    cdef bint accepted
    with nogil:
        _F(b, w, loc_x, mass_x, loc_y, mass_y, &f, &j)
        for it in range(1, max_iter + 1):
            d = f - w
            if not _finite(d):
                with gil:
                    return complex(best_w), it, False, best_err
            err = _scaled(d, w)
            if fabs(d.real) <= tol * (1.0 + abs(w)) and fabs(d.imag) <= tol * fabs(w.imag):
                with gil:
                    return complex(f), it, True, err
            if err < best_err:
                if err < best_err * (1.0 - 1e-3):
                    stall = 0
                best_w = w
                best_err = err
            else:
                stall += 1
            if stall > stall_limit:
                with gil:
                    return complex(best_w), it, False, best_err
            accepted = False
            if j != 1.0:
                cand = w + d / (1.0 - j)
                if cand.imag > 0 and _finite(cand):
                    _F(b, cand, loc_x, mass_x, loc_y, mass_y, &fc, &jc)
                    if _scaled(fc - cand, cand) < err:
                        w = cand
                        f = fc
                        j = jc
                        accepted = True
            if not accepted:
                w = w + theta * d
                _F(b, w, loc_x, mass_x, loc_y, mass_y, &f, &j)
    return complex(best_w), max_iter, False, best_err


def block_average_rows(const double[:, ::1] weights, const cnp.int64_t[::1] block_sizes):
    """Average the rows of ``weights`` over consecutive blocks of the given sizes."""
    cdef Py_ssize_t nb = block_sizes.shape[0], m = weights.shape[1]
    cdef Py_ssize_t k, i, c, row = 0
    out_arr = np.zeros((nb, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double inv
    with nogil:
        for k in range(nb):
            for i in range(block_sizes[k]):
                for c in range(m):
                    out[k, c] += weights[row, c]
                row += 1
            inv = 1.0 / block_sizes[k]
            for c in range(m):
                out[k, c] *= inv
    return out_arr
