"""Pure-Python kernels. Semantics must stay bit-identical to ``_kernels.pyx``."""

from __future__ import annotations

import heapq

BACKEND = "python"


def assign_pass(
    order,
    draws,
    phi_ptr,
    phi_sa2,
    phi_pair,
    pool,
    pool_start,
    pool_count,
    cand_weight,
    pair_budget,
    dzn_budget,
    acc_cand,
    acc_dzn,
    n_acc,
):
    """One sweep over destinations; mutates pools, budgets and the accept log.

    Returns ``(n_acc, weight_added)`` after the sweep.
    """
    # list copies avoid per-element numpy scalar overhead; written back below
    l_phi_ptr = phi_ptr.tolist()
    l_phi_sa2 = phi_sa2.tolist()
    l_phi_pair = phi_pair.tolist()
    l_pool = pool.tolist()
    l_start = pool_start.tolist()
    l_count = pool_count.tolist()
    l_w = cand_weight.tolist()
    l_pair = pair_budget.tolist()
    l_dzn = dzn_budget.tolist()
    added = 0
    for y, u in zip(order.tolist(), draws.tolist()):
        lo, hi = l_phi_ptr[y], l_phi_ptr[y + 1]
        total = 0
        for k in range(lo, hi):
            total += l_count[l_phi_sa2[k]]
        if total == 0:
            continue
        r = int(u * total)
        if r >= total:
            r = total - 1
        k = lo
        while True:
            x = l_phi_sa2[k]
            c = l_count[x]
            if r < c:
                break
            r -= c
            k += 1
        slot = l_start[x] + r
        cand = l_pool[slot]
        w = l_w[cand]
        p = l_phi_pair[k]
        if l_pair[p] >= w and l_dzn[y] >= w:
            l_pair[p] -= w
            l_dzn[y] -= w
            acc_cand[n_acc] = cand
            acc_dzn[n_acc] = y
            n_acc += 1
            added += w
            last = l_start[x] + c - 1
            l_pool[slot] = l_pool[last]
            l_pool[last] = cand
            l_count[x] = c - 1
    pool[:] = l_pool
    pool_count[:] = l_count
    pair_budget[:] = l_pair
    dzn_budget[:] = l_dzn
    return n_acc, added


def apsp_stats(indptr, indices, lengths, n):
    """Dijkstra from every source over a CSR graph.

    Returns ``(sum of finite distances, number of reachable ordered pairs)``,
    excluding each node's distance to itself.
    """
    l_ptr = indptr.tolist()
    l_idx = indices.tolist()
    l_len = lengths.tolist()
    inf = float("inf")
    total = 0.0
    count = 0
    for s in range(n):
        dist = [inf] * n
        done = [False] * n
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in range(l_ptr[u], l_ptr[u + 1]):
                v = l_idx[e]
                nd = d + l_len[e]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        for j in range(n):
            if j != s and done[j]:
                total += dist[j]
                count += 1
    return total, count

