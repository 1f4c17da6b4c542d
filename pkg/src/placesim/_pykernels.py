"""Pure-Python placement kernels.

Loop-for-loop twin of ``_ckernels.pyx``. Both must perform floating point
operations in the same order so the two backends return bit-identical
results; change them together.
"""
import numpy as np

CAP_EPS = 1e-9
N_FLOOR = 0.001


def _total(D, sumz, Z, N, alpha, beta, lam):
    U = sumz / D
    if N < N_FLOOR:
        N = N_FLOOR
    return 1000.0 * (alpha * (1.0 / D) + beta * (U / Z) + lam * (1.0 / (1000.0 * N)))


def evaluate(p, assign, alpha, beta, lam):
    """Fitness of a total placement.

    Returns ``(total, D, Z, U, N, feasible)``.
    """
    a = assign.tolist()
    cpu_d = p.cpu_d.tolist()
    mem_d = p.mem_d.tolist()
    cpu_cap = p.cpu_cap.tolist()
    mem_cap = p.mem_cap.tolist()
    M = len(cpu_cap)
    cpu_u = [0.0] * M
    mem_u = [0.0] * M
    cnt = [0] * M
    for c in range(len(a)):
        m = a[c]
        cpu_u[m] += cpu_d[c]
        mem_u[m] += mem_d[c]
        cnt[m] += 1

    D = 0
    sumz = 0.0
    Z = 0.0
    feasible = True
    for m in range(M):
        if cnt[m] > 0:
            z = (cpu_u[m] / cpu_cap[m] + mem_u[m] / mem_cap[m]) * 0.5
            D += 1
            sumz += z
            if z > Z:
                Z = z
            if cpu_u[m] > cpu_cap[m] + CAP_EPS or mem_u[m] > mem_cap[m] + CAP_EPS:
                feasible = False

    N = 0.0
    ea = p.edge_a.tolist()
    eb = p.edge_b.tolist()
    ew = p.edge_w.tolist()
    for k in range(len(ea)):
        if a[ea[k]] != a[eb[k]]:
            N += ew[k]

    if D == 0:
        return 0.0, 0, 0.0, 0.0, N, feasible
    return _total(D, sumz, Z, N, alpha, beta, lam), D, Z, sumz / D, N, feasible


def first_fit(p, corder, morder):
    """First-fit of containers (in ``corder``) over machines (in ``morder``).

    Returns the assignment array, or None if some container fits nowhere.
    """
    cpu_d = p.cpu_d.tolist()
    mem_d = p.mem_d.tolist()
    cpu_cap = p.cpu_cap.tolist()
    mem_cap = p.mem_cap.tolist()
    M = len(cpu_cap)
    cpu_u = [0.0] * M
    mem_u = [0.0] * M
    out = [-1] * len(cpu_d)
    ms = morder.tolist()
    for c in corder.tolist():
        placed = False
        for m in ms:
            if (cpu_u[m] + cpu_d[c] <= cpu_cap[m] + CAP_EPS
                    and mem_u[m] + mem_d[c] <= mem_cap[m] + CAP_EPS):
                cpu_u[m] += cpu_d[c]
                mem_u[m] += mem_d[c]
                out[c] = m
                placed = True
                break
        if not placed:
            return None
    return np.array(out, dtype=np.int64)


def evict_overloaded(p, assign):
    """Unplace containers until every machine is within capacity.

    Machines are handled in id order. On each overloaded machine the resident
    container with the least communication weight to its co-residents is
    evicted first (ties: lower id), recomputed after every eviction.
    ``assign`` is modified in place (evicted entries become -1); the evicted
    ids are returned in eviction order.
    """
    a = assign.tolist()
    cpu_d = p.cpu_d.tolist()
    mem_d = p.mem_d.tolist()
    cpu_cap = p.cpu_cap.tolist()
    mem_cap = p.mem_cap.tolist()
    indptr = p.indptr.tolist()
    nbr = p.nbr.tolist()
    nbr_w = p.nbr_w.tolist()
    M = len(cpu_cap)
    cpu_u = [0.0] * M
    mem_u = [0.0] * M
    members = [[] for _ in range(M)]
    for c in range(len(a)):
        m = a[c]
        if m >= 0:
            cpu_u[m] += cpu_d[c]
            mem_u[m] += mem_d[c]
            members[m].append(c)

    evicted = []
    for m in range(M):
        res = members[m]
        while cpu_u[m] > cpu_cap[m] + CAP_EPS or mem_u[m] > mem_cap[m] + CAP_EPS:
            best = -1
            best_w = 0.0
            for c in res:
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
            evicted.append(best)
    assign[:] = a
    return np.array(evicted, dtype=np.int64)


def reinsert(p, assign, order, exclude, alpha, beta, lam):
    """Greedily place each unplaced container of ``order`` in turn.

    Each goes to the feasible machine (other than ``exclude``) that maximises
    the fitness of the partial placement after insertion; ties go to the lower
    machine id. Containers with ``assign == -1`` are ignored by the fitness.
    ``assign`` is modified in place. Returns False as soon as a container fits
    nowhere (``assign`` is then left partially updated).
    """
    a = assign.tolist()
    cpu_d = p.cpu_d.tolist()
    mem_d = p.mem_d.tolist()
    cpu_cap = p.cpu_cap.tolist()
    mem_cap = p.mem_cap.tolist()
    indptr = p.indptr.tolist()
    nbr = p.nbr.tolist()
    nbr_w = p.nbr_w.tolist()
    M = len(cpu_cap)
    cpu_u = [0.0] * M
    mem_u = [0.0] * M
    cnt = [0] * M
    for c in range(len(a)):
        m = a[c]
        if m >= 0:
            cpu_u[m] += cpu_d[c]
            mem_u[m] += mem_d[c]
            cnt[m] += 1

    N = 0.0
    ea = p.edge_a.tolist()
    eb = p.edge_b.tolist()
    ew = p.edge_w.tolist()
    for k in range(len(ea)):
        ma = a[ea[k]]
        mb = a[eb[k]]
        if ma >= 0 and mb >= 0 and ma != mb:
            N += ew[k]

    w_on = [0.0] * M
    ok = True
    for c in order.tolist():
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
            ok = False
            break
    assign[:] = a
    return ok
