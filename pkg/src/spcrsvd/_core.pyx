# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ADMM / LADMM sweep loops.

Both loops work on the Gram statistics of the data (``X^T X``, ``X^T y``,
``X^T 1``, ``sum(y)``, ``y^T y``), so a sweep costs O(p^2 k) independent of
n. All p x k matrices are C-contiguous and updated in place. The loops run
without the GIL.
"""

import numpy as np

from libc.math cimport fabs, sqrt
from scipy.linalg.cython_lapack cimport dgesvd, dposv

cdef double RANK_TOL = 1e-12
cdef double NU_FLOOR = 1e-8


cdef inline double soft(double x, double t) noexcept nogil:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


cdef inline double nrm(const double* a, Py_ssize_t m) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(m):
        acc += a[i] * a[i]
    return sqrt(acc)


cdef inline double nrm_diff(const double* a, const double* b, Py_ssize_t m) noexcept nogil:
    cdef double acc = 0.0, t
    cdef Py_ssize_t i
    for i in range(m):
        t = a[i] - b[i]
        acc += t * t
    return sqrt(acc)


cdef void gemm_pp_pk(const double* G, const double* V, double* out, int p, int k) noexcept nogil:
    """out = G @ V for p x p G and p x k V."""
    cdef Py_ssize_t i, l, j
    cdef double g
    for i in range(p * k):
        out[i] = 0.0
    for i in range(p):
        for l in range(p):
            g = G[i * p + l]
            if g != 0.0:
                for j in range(k):
                    out[i * k + j] += g * V[l * k + j]


cdef int procrustes(const double* M, double* V, int p, int k, double* A, double* s,
                    double* U, double* VT, double* work, int lwork) noexcept nogil:
    """V = P Q^T from the thin SVD M = P diag(s) Q^T.

    Row-major M (p x k) is column-major M^T (k x p); LAPACK then returns
    M^T = U diag(s) VT, so P = VT^T and Q = U. Returns 1 when the smallest
    singular value is below RANK_TOL (V untouched), -1 on LAPACK failure.
    """
    cdef char job = b'S'
    cdef int m = k, n = p, lda = k, ldu = k, ldvt = k, info = 0
    cdef Py_ssize_t i, j, l
    cdef double acc
    for i in range(p * k):
        A[i] = M[i]
    dgesvd(&job, &job, &m, &n, A, &lda, s, U, &ldu, VT, &ldvt, work, &lwork, &info)
    if info != 0:
        return -1
    if s[k - 1] < RANK_TOL:
        return 1
    for i in range(p):
        for j in range(k):
            acc = 0.0
            for l in range(k):
                acc = acc + VT[l + i * k] * U[j + l * k]
            V[i * k + j] = acc
    return 0


cdef int coef_step(const double* G, const double* Vr, const double* cy, const double* b0,
                   const double* dual, double rho, double n, double* beta, double* GV,
                   double* A, int p, int k) noexcept nogil:
    """beta = (Vr^T G Vr / n + rho/2 I)^{-1} (Vr^T cy / n + rho/2 (b0 - dual))."""
    cdef char uplo = b'L'
    cdef int kk = k, one = 1, info = 0
    cdef Py_ssize_t i, j, l
    cdef double acc
    gemm_pp_pk(G, Vr, GV, p, k)
    for i in range(k):
        for j in range(k):
            acc = 0.0
            for l in range(p):
                acc = acc + Vr[l * k + i] * GV[l * k + j]
            A[i + j * k] = acc / n
        A[i + i * k] += 0.5 * rho
        acc = 0.0
        for l in range(p):
            acc = acc + Vr[l * k + i] * cy[l]
        beta[i] = acc / n + 0.5 * rho * (b0[i] - dual[i])
    dposv(&uplo, &kk, &one, A, &kk, beta, &kk, &info)
    return info


cdef double pca_loss(const double* V, const double* XtZ, double trG, double* K1, double* K2,
                     int p, int k) noexcept nogil:
    """|X - Z V^T|_F^2 with Z = X V_z, given XtZ = G V_z (here V_z = V)."""
    cdef Py_ssize_t i, j, l
    cdef double a, b, out = trG
    for i in range(k):
        for j in range(k):
            a = 0.0
            b = 0.0
            for l in range(p):
                a = a + V[l * k + i] * XtZ[l * k + j]
                b = b + V[l * k + i] * V[l * k + j]
            K1[i * k + j] = a
            K2[i * k + j] = b
    for i in range(k):
        out -= 2.0 * K1[i * k + i]
        for j in range(k):
            out += K1[i * k + j] * K2[j * k + i]
    return out


cdef double reg_loss(const double* G, const double* GVr, const double* beta, const double* Xty,
                     const double* csum, double ysum, double ysq, double icpt, double n,
                     const double* Vr, double* b, int p, int k) noexcept nogil:
    """|y - icpt 1 - X Vr beta|^2 / n from Gram statistics."""
    cdef Py_ssize_t i, j
    cdef double bGb = 0.0, bc = 0.0, gb
    for i in range(p):
        b[i] = 0.0
        gb = 0.0
        for j in range(k):
            b[i] += Vr[i * k + j] * beta[j]
            gb += GVr[i * k + j] * beta[j]
        bGb += b[i] * gb
        bc += b[i] * (Xty[i] - icpt * csum[i])
    return (ysq - 2.0 * icpt * ysum + n * icpt * icpt - 2.0 * bc + bGb) / n


def admm_loop(double[:, ::1] G, double[:, ::1] Q, double[::1] evals, double[::1] Xty,
              double[::1] col_sums, double y_sum, double y_sq, int n_obs,
              double[:, ::1] V, double[:, ::1] V0, double[:, ::1] V1, double[:, ::1] XtZ,
              double[::1] beta, double[::1] beta0, double[:, ::1] L1, double[:, ::1] L2,
              double[::1] l3, double intercept, double[::1] params, int max_iter):
    """Run ADMM sweeps in place until convergence or ``max_iter``."""
    cdef int p = V.shape[0], k = V.shape[1]
    cdef Py_ssize_t pk = p * k, i, j, l
    cdef double n = n_obs
    cdef double w = params[0], lamV = params[1], lamB = params[2]
    cdef double r1 = params[3], r2 = params[4], r3 = params[5]
    cdef double tabs = params[6], trel = params[7]
    cdef int lwork = 5 * (p + k) + 64 * k + 64

    primal_np = np.zeros((max_iter, 2))
    dual_np = np.zeros((max_iter, 2))
    obj_np = np.zeros(max_iter)
    cdef double[:, ::1] primal = primal_np
    cdef double[:, ::1] dualr = dual_np
    cdef double[::1] obj = obj_np

    cdef double[::1] R = np.zeros(pk), M = np.zeros(pk), prevV0 = np.zeros(pk)
    cdef double[::1] GV = np.zeros(pk), Asvd = np.zeros(pk)
    cdef double[::1] cy = np.zeros(p), Ru = np.zeros(p), t = np.zeros(p), a = np.zeros(p)
    cdef double[::1] bvec = np.zeros(p), u = np.zeros(k), prevb0 = np.zeros(k)
    cdef double[::1] s = np.zeros(k), U = np.zeros(k * k), VT = np.zeros(pk)
    cdef double[::1] Ak = np.zeros(k * k), K1 = np.zeros(k * k), K2 = np.zeros(k * k)
    cdef double[::1] work = np.zeros(lwork)

    cdef double trG = 0.0
    for i in range(p):
        trG += G[i, i]

    cdef int it = 0, degenerate = 0, converged = 0, ret, info
    cdef double b2, nb, acc, blend, thr, rV, rV1, rb, sV, sb
    cdef double eps_pV = 0.0, eps_pb = 0.0, eps_dV = 0.0, eps_db = 0.0
    cdef double sqpk = sqrt(<double> pk), sqk = sqrt(<double> k)
    cdef double* pV = &V[0, 0]
    cdef double* pV0 = &V0[0, 0]
    cdef double* pV1 = &V1[0, 0]
    cdef double* pL1 = &L1[0, 0]
    cdef double* pL2 = &L2[0, 0]
    cdef double* pXtZ = &XtZ[0, 0]
    cdef double* pG = &G[0, 0]

    with nogil:
        while it < max_iter:
            for i in range(p):
                cy[i] = Xty[i] - intercept * col_sums[i]

            # V1: (1/n) G V1 b b^T + (r2/2) V1 = R
            b2 = 0.0
            for j in range(k):
                b2 += beta[j] * beta[j]
            for i in range(p):
                for j in range(k):
                    R[i * k + j] = cy[i] * beta[j] / n + 0.5 * r2 * (pV0[i * k + j] - pL2[i * k + j])
            if b2 == 0.0:
                for i in range(pk):
                    pV1[i] = (2.0 / r2) * R[i]
            else:
                nb = sqrt(b2)
                for j in range(k):
                    u[j] = beta[j] / nb
                for i in range(p):
                    acc = 0.0
                    for j in range(k):
                        acc = acc + R[i * k + j] * u[j]
                    Ru[i] = acc
                for l in range(p):
                    acc = 0.0
                    for i in range(p):
                        acc = acc + Q[i, l] * Ru[i]
                    t[l] = acc / (b2 * evals[l] / n + 0.5 * r2)
                for i in range(p):
                    acc = 0.0
                    for l in range(p):
                        acc = acc + Q[i, l] * t[l]
                    a[i] = acc
                for i in range(p):
                    for j in range(k):
                        pV1[i * k + j] = (2.0 / r2) * (R[i * k + j] - Ru[i] * u[j]) + a[i] * u[j]

            # V: Procrustes of (w/n) X^T Z + (r1/2)(V0 - L1)
            for i in range(pk):
                M[i] = (w / n) * pXtZ[i] + 0.5 * r1 * (pV0[i] - pL1[i])
            ret = procrustes(&M[0], pV, p, k, &Asvd[0], &s[0], &U[0], &VT[0], &work[0], lwork)
            if ret != 0:
                degenerate += 1

            # V0: shrink the rho-weighted blend
            thr = lamV / (r1 + r2)
            for i in range(pk):
                prevV0[i] = pV0[i]
                blend = (r1 * (pV[i] + pL1[i]) + r2 * (pV1[i] + pL2[i])) / (r1 + r2)
                pV0[i] = soft(blend, thr)

            # Z = X V, carried as X^T Z = G V
            gemm_pp_pk(pG, pV, pXtZ, p, k)

            # beta, beta0, intercept
            info = coef_step(pG, pV1, &cy[0], &beta0[0], &l3[0], r3, n, &beta[0], &GV[0], &Ak[0], p, k)
            if info != 0:
                degenerate += 1
            for j in range(k):
                prevb0[j] = beta0[j]
                beta0[j] = soft(beta[j] + l3[j], lamB / r3)
            acc = 0.0
            for i in range(p):
                for j in range(k):
                    acc = acc + col_sums[i] * pV1[i * k + j] * beta[j]
            intercept = (y_sum - acc) / n

            # duals
            for i in range(pk):
                pL1[i] += pV[i] - pV0[i]
                pL2[i] += pV1[i] - pV0[i]
            for j in range(k):
                l3[j] += beta[j] - beta0[j]

            # residuals and thresholds
            rV = nrm_diff(pV, pV0, pk)
            rV1 = nrm_diff(pV1, pV0, pk)
            primal[it, 0] = rV if rV > rV1 else rV1
            rb = nrm_diff(&beta[0], &beta0[0], k)
            primal[it, 1] = rb
            sV = sqrt(r1 * r1 + r2 * r2) * nrm_diff(pV0, &prevV0[0], pk)
            sb = r3 * nrm_diff(&beta0[0], &prevb0[0], k)
            dualr[it, 0] = sV
            dualr[it, 1] = sb
            acc = nrm(pV, pk)
            if nrm(pV0, pk) > acc:
                acc = nrm(pV0, pk)
            if nrm(pV1, pk) > acc:
                acc = nrm(pV1, pk)
            eps_pV = sqpk * tabs + trel * acc
            acc = nrm(&beta[0], k)
            if nrm(&beta0[0], k) > acc:
                acc = nrm(&beta0[0], k)
            eps_pb = sqk * tabs + trel * acc
            eps_dV = sqpk * tabs + trel * sqrt((r1 * nrm(pL1, pk)) ** 2 + (r2 * nrm(pL2, pk)) ** 2)
            eps_db = sqk * tabs + trel * r3 * nrm(&l3[0], k)

            # split objective
            acc = reg_loss(pG, &GV[0], &beta[0], &Xty[0], &col_sums[0], y_sum, y_sq, intercept,
                           n, pV1, &bvec[0], p, k)
            acc = acc + (w / n) * pca_loss(pV, pXtZ, trG, &K1[0], &K2[0], p, k)
            for i in range(pk):
                acc = acc + lamV * fabs(pV0[i])
            for j in range(k):
                acc = acc + lamB * fabs(beta0[j])
            obj[it] = acc

            it += 1
            if (primal[it - 1, 0] <= eps_pV and rb <= eps_pb
                    and sV <= eps_dV and sb <= eps_db):
                converged = 1
                break

    return {
        "iterations": it, "converged": converged, "degenerate": degenerate,
        "intercept": intercept, "primal": primal_np, "dual": dual_np, "objective": obj_np,
        "eps_pri": np.array([eps_pV, eps_pb]), "eps_dual": np.array([eps_dV, eps_db]),
    }


def ladmm_loop(double[:, ::1] G, double max_eig, double[::1] Xty, double[::1] col_sums,
               double y_sum, double y_sq, int n_obs,
               double[:, ::1] V, double[:, ::1] V0, double[:, ::1] XtZ,
               double[::1] beta, double[::1] beta0, double[:, ::1] L, double[::1] lv,
               double intercept, double[::1] params, int max_iter):
    """Run linearized ADMM sweeps in place until convergence or ``max_iter``."""
    cdef int p = V.shape[0], k = V.shape[1]
    cdef Py_ssize_t pk = p * k, i, j, l
    cdef double n = n_obs
    cdef double w = params[0], lamV = params[1], lamB = params[2]
    cdef double r1 = params[3], r2 = params[4]
    cdef double tabs = params[6], trel = params[7]
    cdef int lwork = 5 * (p + k) + 64 * k + 64

    primal_np = np.zeros((max_iter, 2))
    dual_np = np.zeros((max_iter, 2))
    obj_np = np.zeros(max_iter)
    cdef double[:, ::1] primal = primal_np
    cdef double[:, ::1] dualr = dual_np
    cdef double[::1] obj = obj_np

    cdef double[::1] M = np.zeros(pk), prevV0 = np.zeros(pk), GV = np.zeros(pk)
    cdef double[::1] Asvd = np.zeros(pk), VT = np.zeros(pk)
    cdef double[::1] cy = np.zeros(p), bvec = np.zeros(p), Gb = np.zeros(p)
    cdef double[::1] prevb0 = np.zeros(k), s = np.zeros(k), U = np.zeros(k * k)
    cdef double[::1] Ak = np.zeros(k * k), K1 = np.zeros(k * k), K2 = np.zeros(k * k)
    cdef double[::1] work = np.zeros(lwork)

    cdef double trG = 0.0
    for i in range(p):
        trG += G[i, i]

    cdef int it = 0, degenerate = 0, converged = 0, ret, info
    cdef double b2, nu = NU_FLOOR, scale, thr, acc, rV, rb, sV, sb
    cdef double eps_pV = 0.0, eps_pb = 0.0, eps_dV = 0.0, eps_db = 0.0
    cdef double sqpk = sqrt(<double> pk), sqk = sqrt(<double> k)
    cdef double* pV = &V[0, 0]
    cdef double* pV0 = &V0[0, 0]
    cdef double* pL = &L[0, 0]
    cdef double* pXtZ = &XtZ[0, 0]
    cdef double* pG = &G[0, 0]

    with nogil:
        while it < max_iter:
            # V: Procrustes of (w/n) X^T Z + (r1/2)(V0 + L)
            for i in range(pk):
                M[i] = (w / n) * pXtZ[i] + 0.5 * r1 * (pV0[i] + pL[i])
            ret = procrustes(&M[0], pV, p, k, &Asvd[0], &s[0], &U[0], &VT[0], &work[0], lwork)
            if ret != 0:
                degenerate += 1

            # V0: linearized proximal step around the current V0
            b2 = 0.0
            for j in range(k):
                b2 += beta[j] * beta[j]
            nu = b2 * max_eig
            if nu < NU_FLOOR:
                nu = NU_FLOOR
            for i in range(p):
                cy[i] = Xty[i] - intercept * col_sums[i]
            gemm_pp_pk(pG, pV0, &GV[0], p, k)
            scale = 2.0 * n / (2.0 * nu + n * r1)
            thr = n * lamV / (2.0 * nu + n * r1)
            for i in range(p):
                # Gb = (G V0 beta)_i
                acc = 0.0
                for l in range(k):
                    acc = acc + GV[i * k + l] * beta[l]
                Gb[i] = acc
            for i in range(p):
                for j in range(k):
                    prevV0[i * k + j] = pV0[i * k + j]
            for i in range(p):
                for j in range(k):
                    acc = ((cy[i] - Gb[i]) * beta[j] / n + (nu / n) * prevV0[i * k + j]
                           - 0.5 * r1 * (pL[i * k + j] - pV[i * k + j]))
                    pV0[i * k + j] = soft(scale * acc, thr)

            gemm_pp_pk(pG, pV, pXtZ, p, k)

            info = coef_step(pG, pV0, &cy[0], &beta0[0], &lv[0], r2, n, &beta[0], &GV[0], &Ak[0], p, k)
            if info != 0:
                degenerate += 1
            for j in range(k):
                prevb0[j] = beta0[j]
                beta0[j] = soft(beta[j] + lv[j], lamB / r2)
            acc = 0.0
            for i in range(p):
                for j in range(k):
                    acc = acc + col_sums[i] * pV0[i * k + j] * beta[j]
            intercept = (y_sum - acc) / n

            for i in range(pk):
                pL[i] += pV0[i] - pV[i]
            for j in range(k):
                lv[j] += beta[j] - beta0[j]

            rV = nrm_diff(pV0, pV, pk)
            rb = nrm_diff(&beta[0], &beta0[0], k)
            primal[it, 0] = rV
            primal[it, 1] = rb
            sV = r1 * nrm_diff(pV0, &prevV0[0], pk)
            sb = r2 * nrm_diff(&beta0[0], &prevb0[0], k)
            dualr[it, 0] = sV
            dualr[it, 1] = sb
            acc = nrm(pV, pk)
            if nrm(pV0, pk) > acc:
                acc = nrm(pV0, pk)
            eps_pV = sqpk * tabs + trel * acc
            acc = nrm(&beta[0], k)
            if nrm(&beta0[0], k) > acc:
                acc = nrm(&beta0[0], k)
            eps_pb = sqk * tabs + trel * acc
            eps_dV = sqpk * tabs + trel * r1 * nrm(pL, pk)
            eps_db = sqk * tabs + trel * r2 * nrm(&lv[0], k)

            acc = reg_loss(pG, &GV[0], &beta[0], &Xty[0], &col_sums[0], y_sum, y_sq, intercept,
                           n, pV0, &bvec[0], p, k)
            acc = acc + (w / n) * pca_loss(pV, pXtZ, trG, &K1[0], &K2[0], p, k)
            for i in range(pk):
                acc = acc + lamV * fabs(pV0[i])
            for j in range(k):
                acc = acc + lamB * fabs(beta0[j])
            obj[it] = acc

            it += 1
            if rV <= eps_pV and rb <= eps_pb and sV <= eps_dV and sb <= eps_db:
                converged = 1
                break

    return {
        "iterations": it, "converged": converged, "degenerate": degenerate,
        "intercept": intercept, "nu": nu, "primal": primal_np, "dual": dual_np,
        "objective": obj_np, "eps_pri": np.array([eps_pV, eps_pb]),
        "eps_dual": np.array([eps_dV, eps_db]),
    }
