# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled placement kernels; see ``_pykernels.py`` for the reference twin.

Floating point operations follow the same order as the Python twin so both
backends agree bit-for-bit.
"""
import numpy as np
from libc.stdint cimport int64_t

cdef double CAP_EPS = 1e-9
cdef double N_FLOOR = 0.001


cdef inline double _total(long D, double sumz, double Z, double N,
                          double alpha, double beta, double lam) nogil:
    cdef double U = sumz / D
    if N < N_FLOOR:
        N = N_FLOOR
    return 1000.0 * (alpha * (1.0 / D) + beta * (U / Z) + lam * (1.0 / (1000.0 * N)))


def evaluate(p, const int64_t[::1] a, double alpha, double beta, double lam):
    cdef const double[::1] cpu_d = p.cpu_d
    cdef const double[::1] mem_d = p.mem_d
    cdef const double[::1] cpu_cap = p.cpu_cap
    cdef const double[::1] mem_cap = p.mem_cap
    cdef const int64_t[::1] ea = p.edge_a
    cdef const int64_t[::1] eb = p.edge_b
    cdef const double[::1] ew = p.edge_w
    cdef Py_ssize_t M = cpu_cap.shape[0]
    cdef Py_ssize_t n = a.shape[0]
    cdef double[::1] cpu_u = np.zeros(M)
    cdef double[::1] mem_u = np.zeros(M)
    cdef int64_t[::1] cnt = np.zeros(M, dtype=np.int64)
    cdef Py_ssize_t c, m, k
    cdef long D = 0
    cdef double sumz = 0.0, Z = 0.0, z, N = 0.0
    cdef bint feasible = True

    for c in range(n):
        m = a[c]
        cpu_u[m] += cpu_d[c]
        mem_u[m] += mem_d[c]
        cnt[m] += 1
    for m in range(M):
        if cnt[m] > 0:
            z = (cpu_u[m] / cpu_cap[m] + mem_u[m] / mem_cap[m]) * 0.5
            D += 1
            sumz += z
            if z > Z:
                Z = z
            if cpu_u[m] > cpu_cap[m] + CAP_EPS or mem_u[m] > mem_cap[m] + CAP_EPS:
                feasible = False
    for k in range(ea.shape[0]):
        if a[ea[k]] != a[eb[k]]:
            N += ew[k]

    if D == 0:
        return 0.0, 0, 0.0, 0.0, N, feasible
    return _total(D, sumz, Z, N, alpha, beta, lam), D, Z, sumz / D, N, feasible


def first_fit(p, const int64_t[::1] corder, const int64_t[::1] morder):
    cdef const double[::1] cpu_d = p.cpu_d
    cdef const double[::1] mem_d = p.mem_d
    cdef const double[::1] cpu_cap = p.cpu_cap
    cdef const double[::1] mem_cap = p.mem_cap
    cdef Py_ssize_t M = cpu_cap.shape[0]
    cdef double[::1] cpu_u = np.zeros(M)
    cdef double[::1] mem_u = np.zeros(M)
    out_arr = np.full(cpu_d.shape[0], -1, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef Py_ssize_t i, j, c, m
    cdef bint placed
    for i in range(corder.shape[0]):
        c = corder[i]
        placed = False
        for j in range(morder.shape[0]):
            m = morder[j]
            if (cpu_u[m] + cpu_d[c] <= cpu_cap[m] + CAP_EPS
                    and mem_u[m] + mem_d[c] <= mem_cap[m] + CAP_EPS):
                cpu_u[m] += cpu_d[c]
                mem_u[m] += mem_d[c]
                out[c] = m
                placed = True
                break
        if not placed:
            return None
    return out_arr


def evict_overloaded(p, int64_t[::1] a):
    cdef const double[::1] cpu_d = p.cpu_d
    cdef const double[::1] mem_d = p.mem_d
    cdef const double[::1] cpu_cap = p.cpu_cap
    cdef const double[::1] mem_cap = p.mem_cap
    cdef const int64_t[::1] indptr = p.indptr
    cdef const int64_t[::1] nbr = p.nbr
    cdef const double[::1] nbr_w = p.nbr_w
    cdef Py_ssize_t M = cpu_cap.shape[0]
    cdef Py_ssize_t n = a.shape[0]
    cdef double[::1] cpu_u = np.zeros(M)
    cdef double[::1] mem_u = np.zeros(M)
    # containers bucketed by machine, ascending id within a bucket
    cdef int64_t[::1] start = np.zeros(M + 1, dtype=np.int64)
    cdef int64_t[::1] fill = np.zeros(M, dtype=np.int64)
    cdef int64_t[::1] members = np.zeros(n, dtype=np.int64)
    evicted_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] evicted = evicted_arr
    cdef Py_ssize_t n_ev = 0
    cdef Py_ssize_t c, m, k, i, best
    cdef double w, best_w

    for c in range(n):
        m = a[c]
        if m >= 0:
            cpu_u[m] += cpu_d[c]
            mem_u[m] += mem_d[c]
            start[m + 1] += 1
    for m in range(M):
        start[m + 1] += start[m]
    for c in range(n):
        m = a[c]
        if m >= 0:
            members[start[m] + fill[m]] = c
            fill[m] += 1

    for m in range(M):
        while cpu_u[m] > cpu_cap[m] + CAP_EPS or mem_u[m] > mem_cap[m] + CAP_EPS:
            best = -1
            best_w = 0.0
            for i in range(start[m], start[m + 1]):
                c = members[i]
                if a[c] != m:
                    continue
                w = 0.0
                for k in range(indptr[c], indptr[c + 1]):
                    if a[nbr[k]] == m:
                        w += nbr_w[k]
                if best < 0 or w < best_w:
                    best = c
                    best_w = w
            a[best] = -1
            cpu_u[m] -= cpu_d[best]
            mem_u[m] -= mem_d[best]
            evicted[n_ev] = best
            n_ev += 1
    return evicted_arr[:n_ev].copy()


def reinsert(p, int64_t[::1] a, const int64_t[::1] order, Py_ssize_t exclude,
             double alpha, double beta, double lam):
    cdef const double[::1] cpu_d = p.cpu_d
    cdef const double[::1] mem_d = p.mem_d
    cdef const double[::1] cpu_cap = p.cpu_cap
    cdef const double[::1] mem_cap = p.mem_cap
    cdef const int64_t[::1] indptr = p.indptr
    cdef const int64_t[::1] nbr = p.nbr
    cdef const double[::1] nbr_w = p.nbr_w
    cdef const int64_t[::1] ea = p.edge_a
    cdef const int64_t[::1] eb = p.edge_b
    cdef const double[::1] ew = p.edge_w
    cdef Py_ssize_t M = cpu_cap.shape[0]
    cdef Py_ssize_t n = a.shape[0]
    cdef double[::1] cpu_u = np.zeros(M)
    cdef double[::1] mem_u = np.zeros(M)
    cdef int64_t[::1] cnt = np.zeros(M, dtype=np.int64)
    cdef double[::1] w_on = np.zeros(M)
    cdef Py_ssize_t c, m, k, i, best, arg1, ma, mb, mj
    cdef long active, D2
    cdef double N = 0.0, sumz, max1, max2, z, wplaced, best_val
    cdef double cu, mu, znew, zold, s2, other, Z2, N2, val

    for c in range(n):
        m = a[c]
        if m >= 0:
            cpu_u[m] += cpu_d[c]
            mem_u[m] += mem_d[c]
            cnt[m] += 1
    for k in range(ea.shape[0]):
        ma = a[ea[k]]
        mb = a[eb[k]]
        if ma >= 0 and mb >= 0 and ma != mb:
            N += ew[k]

    for i in range(order.shape[0]):
        c = order[i]
        active = 0
        sumz = 0.0
        max1 = -1.0
        max2 = -1.0
        arg1 = -1
        for m in range(M):
            if cnt[m] > 0:
                z = (cpu_u[m] / cpu_cap[m] + mem_u[m] / mem_cap[m]) * 0.5
                active += 1
                sumz += z
                if z > max1:
                    max2 = max1
                    max1 = z
                    arg1 = m
                elif z > max2:
                    max2 = z

        wplaced = 0.0
        for k in range(indptr[c], indptr[c + 1]):
            mj = a[nbr[k]]
            if mj >= 0:
                w_on[mj] += nbr_w[k]
                wplaced += nbr_w[k]

        best = -1
        best_val = 0.0
        for m in range(M):
            if m == exclude:
                continue
            cu = cpu_u[m] + cpu_d[c]
            mu = mem_u[m] + mem_d[c]
            if cu > cpu_cap[m] + CAP_EPS or mu > mem_cap[m] + CAP_EPS:
                continue
            znew = (cu / cpu_cap[m] + mu / mem_cap[m]) * 0.5
            if cnt[m] > 0:
                zold = (cpu_u[m] / cpu_cap[m] + mem_u[m] / mem_cap[m]) * 0.5
                D2 = active
                s2 = sumz - zold + znew
                other = max2 if m == arg1 else max1
            else:
                D2 = active + 1
                s2 = sumz + znew
                other = max1
            Z2 = znew if znew > other else other
            N2 = N + (wplaced - w_on[m])
            val = _total(D2, s2, Z2, N2, alpha, beta, lam)
            if best < 0 or val > best_val:
                best = m
                best_val = val

        if best >= 0:
            a[c] = best
            cpu_u[best] += cpu_d[c]
            mem_u[best] += mem_d[c]
            cnt[best] += 1
            N += wplaced - w_on[best]
        for k in range(indptr[c], indptr[c + 1]):
            mj = a[nbr[k]]
            if mj >= 0:
                w_on[mj] = 0.0
        if best < 0:
            return False
    return True
