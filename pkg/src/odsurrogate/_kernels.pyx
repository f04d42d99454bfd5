# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled kernels. Semantics must stay bit-identical to ``_pykernels.py``."""

from libcpp.queue cimport priority_queue
from libcpp.pair cimport pair
from libcpp.vector cimport vector

BACKEND = "cython"

from libc.stdint cimport int64_t as i64


def assign_pass(
    const i64[::1] order,
    const double[::1] draws,
    const i64[::1] phi_ptr,
    const i64[::1] phi_sa2,
    const i64[::1] phi_pair,
    i64[::1] pool,
    const i64[::1] pool_start,
    i64[::1] pool_count,
    const i64[::1] cand_weight,
    i64[::1] pair_budget,
    i64[::1] dzn_budget,
    i64[::1] acc_cand,
    i64[::1] acc_dzn,
    i64 n_acc,
):
    cdef Py_ssize_t pos, n = order.shape[0]
    cdef i64 y, lo, hi, k, total, r, x, c, slot, cand, w, p, last
    cdef i64 added = 0
    cdef double u
    with nogil:
        for pos in range(n):
            y = order[pos]
            u = draws[pos]
            lo = phi_ptr[y]
            hi = phi_ptr[y + 1]
            total = 0
            for k in range(lo, hi):
                total += pool_count[phi_sa2[k]]
            if total == 0:
                continue
            r = <i64>(u * <double>total)
            if r >= total:
                r = total - 1
            k = lo
            while True:
                x = phi_sa2[k]
                c = pool_count[x]
                if r < c:
                    break
                r -= c
                k += 1
            slot = pool_start[x] + r
            cand = pool[slot]
            w = cand_weight[cand]
            p = phi_pair[k]
            if pair_budget[p] >= w and dzn_budget[y] >= w:
                pair_budget[p] -= w
                dzn_budget[y] -= w
                acc_cand[n_acc] = cand
                acc_dzn[n_acc] = y
                n_acc += 1
                added += w
                last = pool_start[x] + c - 1
                pool[slot] = pool[last]
                pool[last] = cand
                pool_count[x] = c - 1
    return n_acc, added


def apsp_stats(const i64[::1] indptr, const i64[::1] indices, const double[::1] lengths, i64 n):
    cdef double total = 0.0
    cdef i64 count = 0
    cdef i64 s, u, v, e, j
    cdef double d, nd
    cdef double inf = float("inf")
    cdef vector[double] dist
    cdef vector[char] done
    cdef priority_queue[pair[double, i64]] heap
    dist.resize(n)
    done.resize(n)
    with nogil:
        for s in range(n):
            for j in range(n):
                dist[j] = inf
                done[j] = 0
            dist[s] = 0.0
            # max-heap on (-dist, -node) pops smallest dist, then smallest node
            heap.push(pair[double, i64](-0.0, -s))
            while not heap.empty():
                d = -heap.top().first
                u = -heap.top().second
                heap.pop()
                if done[u]:
                    continue
                done[u] = 1
                for e in range(indptr[u], indptr[u + 1]):
                    v = indices[e]
                    nd = d + lengths[e]
                    if nd < dist[v]:
                        dist[v] = nd
                        heap.push(pair[double, i64](-nd, -v))
            for j in range(n):
                if j != s and done[j]:
                    total += dist[j]
                    count += 1
    return total, count
