# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused 1D HDG kernel: element condensation, tridiagonal assembly, solve and recovery.

Same arithmetic as the generic numpy path specialised to intervals. Element
e spans nodes e and e+1; local unknowns are [u_L, u_R, q_L, q_R] and the
trace unknowns are the node values.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from scipy.linalg.cython_lapack cimport zgtsv

ctypedef double complex cplx

cdef double PIVOT_RTOL = 1e-12


cdef inline double cabs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double cabs1(cplx z) nogil:
    # |re| + |im|: cheap magnitude good enough for pivoting
    return fabs(z.real) + fabs(z.imag)


cdef int local_solve(double h, double k, cplx tl, cplx tr, cplx f0, cplx f1,
                     cplx X[4][3]) noexcept nogil:
    """X = A^{-1} [B | F]; returns 0, or 1 if a pivot falls below the threshold."""
    cdef cplx A[4][4]
    cdef int i, j, c, p
    cdef double m6 = h / 6.0, big, mag, s
    cdef cplx fac, tmp
    for i in range(4):
        for j in range(4):
            A[i][j] = 0
        for j in range(3):
            X[i][j] = 0
    # (q, r) - (u, r') + <û, r n>
    A[2][2] = 2 * m6; A[2][3] = m6; A[3][2] = m6; A[3][3] = 2 * m6
    A[2][0] = 0.5; A[2][1] = 0.5; A[3][0] = -0.5; A[3][1] = -0.5
    # -(q, v') - k^2 (u, v) + <q n + tau (u - û), v>
    A[0][2] = 0.5; A[0][3] = 0.5; A[1][2] = -0.5; A[1][3] = -0.5
    A[0][0] = -k * k * 2 * m6 + tl; A[0][1] = -k * k * m6
    A[1][0] = -k * k * m6; A[1][1] = -k * k * 2 * m6 + tr
    A[0][2] = A[0][2] - 1.0   # left node normal -1
    A[1][3] = A[1][3] + 1.0   # right node normal +1
    # B columns: 0 = left node, 1 = right node
    X[0][0] = -tl; X[2][0] = -1.0
    X[1][1] = -tr; X[3][1] = 1.0
    X[0][2] = f0; X[1][2] = f1
    # row equilibration
    for i in range(4):
        big = 0
        for j in range(4):
            mag = cabs1(A[i][j])
            if mag > big:
                big = mag
        s = 1.0 / big
        for j in range(4):
            A[i][j] = A[i][j] * s
        for j in range(3):
            X[i][j] = X[i][j] * s
    for c in range(4):
        p = c
        big = cabs1(A[c][c])
        for i in range(c + 1, 4):
            mag = cabs1(A[i][c])
            if mag > big:
                big = mag
                p = i
        if big < PIVOT_RTOL:
            return 1
        if p != c:
            for j in range(4):
                tmp = A[c][j]; A[c][j] = A[p][j]; A[p][j] = tmp
            for j in range(3):
                tmp = X[c][j]; X[c][j] = X[p][j]; X[p][j] = tmp
        for i in range(c + 1, 4):
            fac = A[i][c] / A[c][c]
            for j in range(c, 4):
                A[i][j] = A[i][j] - fac * A[c][j]
            for j in range(3):
                X[i][j] = X[i][j] - fac * X[c][j]
    for c in range(3, -1, -1):
        for j in range(3):
            tmp = X[c][j]
            for i in range(c + 1, 4):
                tmp = tmp - A[c][i] * X[i][j]
            X[c][j] = tmp / A[c][c]
    return 0


def solve_1d(const double[::1] x, double k, const cplx[::1] tau, const cplx[::1] F0,
             const cplx[::1] F1, cplx g_left, cplx g_right):
    """Solve the 1D trace system on nodes ``x`` with per-node penalties ``tau``.

    ``F0``/``F1`` are the loads (f, lambda_L)/(f, lambda_R) per element and
    ``g_left``/``g_right`` the impedance data at the end points. Returns
    ``(status, uhat, u, q, (lower, diag, upper, rhs))`` where status is -1 on
    success or the index of the first singular element.
    """
    cdef Py_ssize_t n = x.shape[0] - 1, e
    cdef cnp.ndarray[cplx, ndim=1] lower = np.zeros(n, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=1] diag = np.zeros(n + 1, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=1] upper = np.zeros(n, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=1] rhs = np.zeros(n + 1, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=2] u = np.zeros((n, 2), dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=2] q = np.zeros((n, 2), dtype=np.complex128)
    cdef cplx[::1] lo = lower, di = diag, up = upper, r = rhs
    cdef cplx[:, ::1] uv = u, qv = q
    cdef cplx X[4][3]
    cdef cplx tl, tr
    cdef int bad = -1, info = 0, nn, nrhs = 1
    with nogil:
        for e in range(n):
            tl = tau[e]
            tr = tau[e + 1]
            if local_solve(x[e + 1] - x[e], k, tl, tr, F0[e], F1[e], X):
                bad = e
                break
            # flux rows: C x + D û with C[v] = tau_v e_v + n_v e_{2+v}, D = -diag(tau)
            di[e] += tl * X[0][0] - X[2][0] + tl
            up[e] += tl * X[0][1] - X[2][1]
            lo[e] += tr * X[1][0] + X[3][0]
            di[e + 1] += tr * X[1][1] + X[3][1] + tr
            r[e] += tl * X[0][2] - X[2][2]
            r[e + 1] += tr * X[1][2] + X[3][2]
    if bad >= 0:
        return bad, None, None, None, None
    diag[0] += 1j * k
    diag[n] += 1j * k
    rhs[0] += g_left
    rhs[n] += g_right
    system = (lower.copy(), diag.copy(), upper.copy(), rhs.copy())
    cdef cnp.ndarray[cplx, ndim=1] uhat = rhs
    cdef cnp.ndarray[cplx, ndim=1] dl = lower, dd = diag, du = upper
    nn = <int>(n + 1)
    zgtsv(&nn, &nrhs, &dl[0], &dd[0], &du[0], &uhat[0], &nn, &info)
    if info != 0:
        raise ArithmeticError(f"tridiagonal solve failed: zgtsv info={info}")
    cdef cplx[::1] uh = uhat
    with nogil:
        for e in range(n):
            local_solve(x[e + 1] - x[e], k, tau[e], tau[e + 1], F0[e], F1[e], X)
            uv[e, 0] = X[0][2] - X[0][0] * uh[e] - X[0][1] * uh[e + 1]
            uv[e, 1] = X[1][2] - X[1][0] * uh[e] - X[1][1] * uh[e + 1]
            qv[e, 0] = X[2][2] - X[2][0] * uh[e] - X[2][1] * uh[e + 1]
            qv[e, 1] = X[3][2] - X[3][0] * uh[e] - X[3][1] * uh[e + 1]
    return -1, uhat, u, q, system
