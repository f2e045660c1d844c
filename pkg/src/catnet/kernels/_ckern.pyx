# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled BFS kernels: all-pairs path statistics and Brandes betweenness.

These dominate the runtime of the topology report on graphs with a few
thousand nodes; the pure-Python twin lives in ``_pure.py``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def closeness_paths(int[:] indptr, int[:] indices):
    """All-pairs BFS summary.

    Returns (harmonic closeness per node, diameter, average path length
    over ordered reachable pairs, connected flag).
    """
    cdef int n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] harmonic = np.zeros(n)
    cdef double[:] harm = harmonic
    cdef cnp.ndarray[long, ndim=1] dist_arr = np.empty(n, dtype=np.int64)
    cdef long[:] dist = dist_arr
    cdef cnp.ndarray[int, ndim=1] queue_arr = np.empty(n, dtype=np.int32)
    cdef int[:] queue = queue_arr
    cdef int s, u, v, i, head, tail
    cdef long d, diameter = 0, total = 0, pairs = 0, reached
    cdef double hsum
    cdef bint connected = n > 0

    for s in range(n):
        for i in range(n):
            dist[i] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        hsum = 0.0
        reached = 0
        while head < tail:
            u = queue[head]
            head += 1
            d = dist[u]
            for i in range(indptr[u], indptr[u + 1]):
                v = indices[i]
                if dist[v] < 0:
                    dist[v] = d + 1
                    queue[tail] = v
                    tail += 1
                    hsum += 1.0 / (d + 1)
                    total += d + 1
                    reached += 1
                    if d + 1 > diameter:
                        diameter = d + 1
        harm[s] = hsum
        pairs += reached
        if reached != n - 1:
            connected = False

    avg = total / <double>pairs if pairs > 0 else 0.0
    return harmonic, int(diameter), avg, bool(connected)


def betweenness(int[:] indptr, int[:] indices):
    """Brandes betweenness: endpoints excluded, each unordered pair once."""
    cdef int n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] bc_arr = np.zeros(n)
    cdef double[:] bc = bc_arr
    cdef cnp.ndarray[long, ndim=1] dist_arr = np.empty(n, dtype=np.int64)
    cdef long[:] dist = dist_arr
    cdef cnp.ndarray[double, ndim=1] sigma_arr = np.empty(n)
    cdef double[:] sigma = sigma_arr
    cdef cnp.ndarray[double, ndim=1] delta_arr = np.empty(n)
    cdef double[:] delta = delta_arr
    cdef cnp.ndarray[int, ndim=1] order_arr = np.empty(n, dtype=np.int32)
    cdef int[:] order = order_arr
    # predecessor lists stored flat: at most one entry per directed edge
    cdef long m = indices.shape[0]
    cdef cnp.ndarray[int, ndim=1] pred_arr = np.empty(m if m > 0 else 1, dtype=np.int32)
    cdef int[:] pred = pred_arr
    cdef cnp.ndarray[long, ndim=1] pstart_arr = np.empty(n + 1, dtype=np.int64)
    cdef long[:] pstart = pstart_arr
    cdef cnp.ndarray[long, ndim=1] pcount_arr = np.empty(n, dtype=np.int64)
    cdef long[:] pcount = pcount_arr
    cdef int s, u, v, w, i, head, tail
    cdef long j

    for s in range(n):
        for i in range(n):
            dist[i] = -1
            sigma[i] = 0.0
            delta[i] = 0.0
            pcount[i] = 0
        # predecessor slots mirror the CSR layout of the incoming node
        for i in range(n):
            pstart[i] = indptr[i]
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = order[head]
            head += 1
            for j in range(indptr[u], indptr[u + 1]):
                v = indices[j]
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    order[tail] = v
                    tail += 1
                if dist[v] == dist[u] + 1:
                    sigma[v] += sigma[u]
                    pred[pstart[v] + pcount[v]] = u
                    pcount[v] += 1
        for i in range(tail - 1, -1, -1):
            w = order[i]
            for j in range(pstart[w], pstart[w] + pcount[w]):
                u = pred[j]
                delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]

    for i in range(n):
        bc[i] = bc[i] / 2.0
    return bc_arr
