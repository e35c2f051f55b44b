"""Low-level numerical kernels with two interchangeable backends.

The hot paths (periodic distance transform, max-flow/min-cut, stencil cut
counting) exist twice: a JIT-compiled implementation and a pure
numpy/scipy one. The backend is chosen once at import time from the
TORUSFLOW_KERNELS environment variable:

    TORUSFLOW_KERNELS=numba   force the JIT kernels (error if numba missing)
    TORUSFLOW_KERNELS=numpy   force the numpy/scipy fallbacks
    unset or "auto"           numba if importable, else numpy

Both backends produce bit-identical results: distances are exact integer
squared numerators, and minimal cuts are canonical (the source-reachable
set of the residual graph is the same for every maximum flow).
"""
from __future__ import annotations

import os

import numpy as np

_mode = os.environ.get("TORUSFLOW_KERNELS", "auto").strip().lower()
if _mode not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"TORUSFLOW_KERNELS must be auto|numba|numpy, got {_mode!r}")

_HAVE_NUMBA = False
if _mode in ("auto", "numba"):
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _mode == "numba":
            raise

USE_NUMBA = _HAVE_NUMBA and _mode in ("auto", "numba")
BACKEND = "numba" if USE_NUMBA else "numpy"

if not USE_NUMBA:
    def njit(*args, **kwargs):
        """No-op decorator stand-in so the module body stays importable."""
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


INF64 = np.int64(1) << np.int64(62)

# Interaction stencil as (dx, dy) cell offsets, one entry per unordered
# neighbor-pair family. Weight classes: 0=(1,0), 1=(0,1), 2=diagonals,
# 3=(2,+-1), 4=(1,+-2).
STENCIL = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (2, -1), (1, 2), (1, -2))
WEIGHT_CLASS = (0, 1, 2, 2, 3, 3, 4, 4)


# ---------------------------------------------------------------------------
# exact periodic squared distance transform
# ---------------------------------------------------------------------------

@njit(cache=True)
def _dt1d_sq(f, w, v, zn, zd, out):
    """1D lower envelope of parabolas: out[p] = min_q f[q] + w*(p-q)^2.

    Exact in int64. Envelope boundaries are the rationals zn/(2*w*zd); the
    shared positive factor 2*w cancels from every comparison, which keeps
    all products below ~2e18 for grids up to 2048 cells per side.
    Entries with f[q] >= INF64 are treated as absent.
    """
    m = f.shape[0]
    k = -1
    for q in range(m):
        fq = f[q]
        if fq >= INF64:
            continue
        if k < 0:
            k = 0
            v[0] = q
            zn[0] = -INF64
            zd[0] = 1
            continue
        while True:
            r = v[k]
            # intersection abscissa of parabolas q and r, times 2w:
            # s*2w = (f[q]-f[r] + w*(q^2-r^2)) / (q-r)
            sn = fq - f[r] + w * (q * q - r * r)
            sd = q - r
            # s <= z[k]  <=>  sn*zd[k] <= zn[k]*sd  (both denominators > 0)
            if k > 0 and sn * zd[k] <= zn[k] * sd:
                k -= 1
            else:
                k += 1
                v[k] = q
                zn[k] = sn
                zd[k] = sd
                break
    if k < 0:
        for p in range(m):
            out[p] = INF64
        return
    j = 0
    for p in range(m):
        # advance while z[j+1] <= p, i.e. zn[j+1] <= p*2w*zd[j+1]
        while j < k and zn[j + 1] <= p * 2 * w * zd[j + 1]:
            j += 1
        d = p - v[j]
        out[p] = f[v[j]] + w * d * d


@njit(cache=True)
def _edt_sq_periodic_numba(occ, wrow, wcol):
    """Squared integer distance to the nearest occupied cell, periodic.

    occ: uint8 (ny, nx). out[j, i] = min over occupied (j', i') of
    wrow*dj^2 + wcol*di^2 with dj, di shortest periodic offsets.
    Periodicity is handled by tripling each axis and reading the middle
    copy, which is exact because every cell is within half a period of
    its nearest feature.
    """
    ny, nx = occ.shape
    g = np.empty((ny, nx), dtype=np.int64)
    f3 = np.empty(3 * nx, dtype=np.int64)
    o3 = np.empty(3 * nx, dtype=np.int64)
    v = np.empty(3 * nx + 1, dtype=np.int64)
    zn = np.empty(3 * nx + 2, dtype=np.int64)
    zd = np.empty(3 * nx + 2, dtype=np.int64)
    for j in range(ny):
        for i in range(nx):
            val = np.int64(0) if occ[j, i] != 0 else INF64
            f3[i] = val
            f3[i + nx] = val
            f3[i + 2 * nx] = val
        _dt1d_sq(f3, wcol, v, zn, zd, o3)
        for i in range(nx):
            g[j, i] = o3[nx + i]
    out = np.empty((ny, nx), dtype=np.int64)
    fy = np.empty(3 * ny, dtype=np.int64)
    oy = np.empty(3 * ny, dtype=np.int64)
    vy = np.empty(3 * ny + 1, dtype=np.int64)
    zny = np.empty(3 * ny + 2, dtype=np.int64)
    zdy = np.empty(3 * ny + 2, dtype=np.int64)
    for i in range(nx):
        for j in range(ny):
            val = g[j, i]
            fy[j] = val
            fy[j + ny] = val
            fy[j + 2 * ny] = val
        _dt1d_sq(fy, wrow, vy, zny, zdy, oy)
        for j in range(ny):
            out[j, i] = oy[ny + j]
    return out


def _edt_sq_periodic_numpy(occ: np.ndarray, wrow: int, wcol: int) -> np.ndarray:
    """scipy fallback: 3x3 tiling, anisotropic sampling, exact re-rounding."""
    from scipy.ndimage import distance_transform_edt

    ny, nx = occ.shape
    tiled = np.tile(occ == 0, (3, 3))
    d = distance_transform_edt(tiled, sampling=(np.sqrt(wrow), np.sqrt(wcol)))
    mid = d[ny:2 * ny, nx:2 * nx]
    # max value wrow*(1.5*ny)^2 + wcol*(1.5*nx)^2 < 2^53 for sides <= 2048,
    # so squaring the float distance rounds back to the exact integer.
    return np.rint(mid * mid).astype(np.int64)


def edt_sq_periodic(occ: np.ndarray, wrow: int, wcol: int) -> np.ndarray:
    """Exact periodic squared distance (integer numerators) to occupied cells."""
    ny, nx = occ.shape
    if max(ny, nx) > 2048:
        raise ValueError("exact integer distance transform supports sides <= 2048")
    if not occ.any():
        return np.full((ny, nx), INF64, dtype=np.int64)
    if USE_NUMBA:
        return _edt_sq_periodic_numba(np.ascontiguousarray(occ, dtype=np.uint8),
                                      np.int64(wrow), np.int64(wcol))
    return _edt_sq_periodic_numpy(np.asarray(occ, dtype=np.uint8), wrow, wcol)


# ---------------------------------------------------------------------------
# stencil cut counts
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cut_counts_numba(occ):
    ny, nx = occ.shape
    c = np.zeros(8, dtype=np.int64)
    for j in range(ny):
        jp = j + 1 if j + 1 < ny else j + 1 - ny
        jm = j - 1 if j >= 1 else j - 1 + ny
        jp2 = j + 2 if j + 2 < ny else j + 2 - ny
        jm2 = j - 2 if j >= 2 else j - 2 + ny
        for i in range(nx):
            a = occ[j, i]
            ip = i + 1 if i + 1 < nx else i + 1 - nx
            ip2 = i + 2 if i + 2 < nx else i + 2 - nx
            if a != occ[j, ip]:
                c[0] += 1
            if a != occ[jp, i]:
                c[1] += 1
            if a != occ[jp, ip]:
                c[2] += 1
            if a != occ[jm, ip]:
                c[3] += 1
            if a != occ[jp, ip2]:
                c[4] += 1
            if a != occ[jm, ip2]:
                c[5] += 1
            if a != occ[jp2, ip]:
                c[6] += 1
            if a != occ[jm2, ip]:
                c[7] += 1
    return c


def _cut_counts_numpy(occ: np.ndarray) -> np.ndarray:
    c = np.empty(8, dtype=np.int64)
    for k, (dx, dy) in enumerate(STENCIL):
        rolled = np.roll(occ, shift=(dy, dx), axis=(0, 1))
        c[k] = int(np.count_nonzero(occ != rolled))
    return c


def cut_counts(occ: np.ndarray) -> np.ndarray:
    """Opposite-phase pair counts for the 8 stencil families, in STENCIL order."""
    if USE_NUMBA:
        return _cut_counts_numba(np.ascontiguousarray(occ, dtype=np.uint8))
    return _cut_counts_numpy(np.asarray(occ, dtype=bool))


# ---------------------------------------------------------------------------
# max-flow / min-cut
# ---------------------------------------------------------------------------
# Graph format shared by both backends:
#   indptr, nbr : CSR adjacency over internal nodes (each undirected edge
#                 appears in both endpoint rows)
#   aid[a]      : slot of the directed arc (row_node -> nbr[a]) in rescap;
#                 the reverse arc lives at slot aid[a]^1
#   rescap      : residual capacities per slot, consumed in place
#   tr[i]       : net terminal capacity (>0 source surplus, <0 sink demand),
#                 consumed in place

@njit(cache=True)
def _bk_maxflow(indptr, nbr, aid, rescap, tr):
    """Boykov-Kolmogorov max-flow with combined terminal capacities."""
    n = indptr.shape[0] - 1
    FREE, TREE_S, TREE_T = np.uint8(0), np.uint8(1), np.uint8(2)
    tree = np.zeros(n, dtype=np.uint8)
    parent_node = np.full(n, -1, dtype=np.int64)  # -1 root, -2 orphan mark
    parent_slot = np.zeros(n, dtype=np.int64)     # slot of arc (i -> parent)
    dist = np.zeros(n, dtype=np.int64)
    ts = np.zeros(n, dtype=np.int64)
    tstamp = np.int64(1)

    cap_q = 2 * n + 16
    queue = np.empty(cap_q, dtype=np.int64)
    qh = np.int64(0)
    qn = np.int64(0)
    in_active = np.zeros(n, dtype=np.uint8)
    orphans = np.empty(n + 16, dtype=np.int64)
    path_s = np.empty(n + 2, dtype=np.int64)
    path_t = np.empty(n + 2, dtype=np.int64)
    flow = np.int64(0)

    for i in range(n):
        if tr[i] != 0:
            tree[i] = TREE_S if tr[i] > 0 else TREE_T
            dist[i] = 1
            queue[(qh + qn) % cap_q] = i
            qn += 1
            in_active[i] = 1

    while qn > 0:
        p = queue[qh]
        qh = (qh + 1) % cap_q
        qn -= 1
        if in_active[p] == 0:
            continue
        in_active[p] = 0
        tp = tree[p]
        if tp == FREE:
            continue

        # GROW from p until the trees meet or p's arcs are exhausted
        found = False
        meet_arc = np.int64(-1)
        s_end = np.int64(-1)
        t_end = np.int64(-1)
        for a in range(indptr[p], indptr[p + 1]):
            q = nbr[a]
            slot = aid[a]
            if tp == TREE_S:
                r = rescap[slot]
            else:
                r = rescap[slot ^ 1]
            if r <= 0:
                continue
            tq = tree[q]
            if tq == FREE:
                tree[q] = tp
                parent_node[q] = p
                parent_slot[q] = slot ^ 1
                dist[q] = dist[p] + 1
                ts[q] = ts[p]
                if in_active[q] == 0:
                    in_active[q] = 1
                    if qn >= cap_q:
                        newq = np.empty(cap_q * 2, dtype=np.int64)
                        for k in range(qn):
                            newq[k] = queue[(qh + k) % cap_q]
                        queue = newq
                        qh = 0
                        cap_q = cap_q * 2
                    queue[(qh + qn) % cap_q] = q
                    qn += 1
            elif tq != tp:
                found = True
                if tp == TREE_S:
                    s_end = p
                    t_end = q
                    meet_arc = slot
                else:
                    s_end = q
                    t_end = p
                    meet_arc = slot ^ 1
                break

        if not found:
            continue

        # p's arc scan was interrupted: keep it active
        if in_active[p] == 0:
            in_active[p] = 1
            if qn >= cap_q:
                newq = np.empty(cap_q * 2, dtype=np.int64)
                for k in range(qn):
                    newq[k] = queue[(qh + k) % cap_q]
                queue = newq
                qh = 0
                cap_q = cap_q * 2
            queue[(qh + qn) % cap_q] = p
            qn += 1

        # AUGMENT along sroot..s_end -> meet -> t_end..troot
        ns = np.int64(0)
        x = s_end
        while True:
            path_s[ns] = x
            ns += 1
            if parent_node[x] < 0:
                break
            x = parent_node[x]
        nt = np.int64(0)
        x = t_end
        while True:
            path_t[nt] = x
            nt += 1
            if parent_node[x] < 0:
                break
            x = parent_node[x]
        sroot = path_s[ns - 1]
        troot = path_t[nt - 1]

        bn = tr[sroot]
        for k in range(ns - 1):
            r = rescap[parent_slot[path_s[k]] ^ 1]  # parent -> node
            if r < bn:
                bn = r
        if rescap[meet_arc] < bn:
            bn = rescap[meet_arc]
        for k in range(nt - 1):
            r = rescap[parent_slot[path_t[k]]]  # node -> parent
            if r < bn:
                bn = r
        if -tr[troot] < bn:
            bn = -tr[troot]

        flow += bn
        tr[sroot] -= bn
        tr[troot] += bn
        rescap[meet_arc] -= bn
        rescap[meet_arc ^ 1] += bn

        norphans = np.int64(0)
        for k in range(ns - 1):
            x = path_s[k]
            sl = parent_slot[x] ^ 1
            rescap[sl] -= bn
            rescap[sl ^ 1] += bn
            if rescap[sl] == 0:
                parent_node[x] = -2
                orphans[norphans] = x
                norphans += 1
        for k in range(nt - 1):
            x = path_t[k]
            sl = parent_slot[x]
            rescap[sl] -= bn
            rescap[sl ^ 1] += bn
            if rescap[sl] == 0:
                parent_node[x] = -2
                orphans[norphans] = x
                norphans += 1
        if tr[sroot] == 0 and parent_node[sroot] == -1 and tree[sroot] == TREE_S:
            parent_node[sroot] = -2
            orphans[norphans] = sroot
            norphans += 1
        if tr[troot] == 0 and parent_node[troot] == -1 and tree[troot] == TREE_T:
            parent_node[troot] = -2
            orphans[norphans] = troot
            norphans += 1

        # ADOPT orphans: find a same-tree parent with residual toward the
        # orphan whose chain still reaches a root; else free the node
        tstamp += 1
        oi = np.int64(0)
        while oi < norphans:
            x = orphans[oi]
            oi += 1
            tx = tree[x]
            best_a = np.int64(-1)
            best_d = np.int64(1) << 60
            for a in range(indptr[x], indptr[x + 1]):
                q = nbr[a]
                if tree[q] != tx:
                    continue
                slot = aid[a]
                if tx == TREE_S:
                    r = rescap[slot ^ 1]  # q -> x feeds x from the source side
                else:
                    r = rescap[slot]      # x -> q drains x toward the sink side
                if r <= 0:
                    continue
                d = np.int64(0)
                y = q
                ok = False
                while True:
                    if ts[y] == tstamp:
                        d += dist[y]
                        ok = True
                        break
                    pn = parent_node[y]
                    if pn == -1:
                        d += 1
                        ok = True
                        break
                    if pn == -2:
                        ok = False
                        break
                    d += 1
                    y = pn
                # cache distances along the verified chain for this timestamp
                if ok:
                    dd = d
                    y = q
                    while ts[y] != tstamp:
                        dist[y] = dd
                        ts[y] = tstamp
                        dd -= 1
                        pn = parent_node[y]
                        if pn < 0:
                            break
                        y = pn
                    if d < best_d:
                        best_d = d
                        best_a = a
            if best_a >= 0:
                parent_node[x] = nbr[best_a]
                parent_slot[x] = aid[best_a]
                dist[x] = best_d + 1
                ts[x] = tstamp
            else:
                for a in range(indptr[x], indptr[x + 1]):
                    q = nbr[a]
                    if tree[q] != tx:
                        continue
                    if parent_node[q] == x:
                        parent_node[q] = -2
                        if norphans >= orphans.shape[0]:
                            tmp = np.empty(orphans.shape[0] * 2, dtype=np.int64)
                            tmp[:norphans] = orphans[:norphans]
                            orphans = tmp
                        orphans[norphans] = q
                        norphans += 1
                    slot = aid[a]
                    if tx == TREE_S:
                        r = rescap[slot ^ 1]
                    else:
                        r = rescap[slot]
                    if r > 0 and in_active[q] == 0:
                        in_active[q] = 1
                        if qn >= cap_q:
                            newq = np.empty(cap_q * 2, dtype=np.int64)
                            for k in range(qn):
                                newq[k] = queue[(qh + k) % cap_q]
                            queue = newq
                            qh = 0
                            cap_q = cap_q * 2
                        queue[(qh + qn) % cap_q] = q
                        qn += 1
                tree[x] = FREE
                parent_node[x] = -1

    return flow


@njit(cache=True)
def _source_reachable(indptr, nbr, aid, rescap, tr):
    """Nodes reachable from the source in the residual graph of a maximum
    flow. This set is identical for every maximum flow, so the minimal cut
    it induces is canonical."""
    n = indptr.shape[0] - 1
    seen = np.zeros(n, dtype=np.uint8)
    stack = np.empty(n, dtype=np.int64)
    top = np.int64(0)
    for i in range(n):
        if tr[i] > 0:
            seen[i] = 1
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        x = stack[top]
        for a in range(indptr[x], indptr[x + 1]):
            q = nbr[a]
            if seen[q] == 0 and rescap[aid[a]] > 0:
                seen[q] = 1
                stack[top] = q
                top += 1
    return seen


@njit(cache=True)
def _sink_reaching(indptr, nbr, aid, rescap, tr):
    """Nodes with a positive-residual path to the sink; the complement is
    the canonical inclusion-maximal minimizer."""
    n = indptr.shape[0] - 1
    seen = np.zeros(n, dtype=np.uint8)
    stack = np.empty(n, dtype=np.int64)
    top = np.int64(0)
    for i in range(n):
        if tr[i] < 0:
            seen[i] = 1
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        q = stack[top]
        for a in range(indptr[q], indptr[q + 1]):
            x = nbr[a]
            # the arc at position a is (q -> x); x reaches the sink through
            # q if the reverse arc (x -> q) = slot aid[a]^1 has residual
            if seen[x] == 0 and rescap[aid[a] ^ 1] > 0:
                seen[x] = 1
                stack[top] = x
                top += 1
    return seen


def _group_rank(keys: np.ndarray) -> np.ndarray:
    """rank[t] = number of earlier entries with the same key (stable)."""
    m = keys.shape[0]
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    new_run = np.r_[True, sorted_keys[1:] != sorted_keys[:-1]]
    starts = np.flatnonzero(new_run)
    run_ids = np.cumsum(new_run) - 1
    ranks = np.empty(m, dtype=np.int64)
    ranks[order] = np.arange(m, dtype=np.int64) - starts[run_ids]
    return ranks


def build_edge_csr(n: int, uu: np.ndarray, vv: np.ndarray,
                   ww: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pack undirected edges (uu[t], vv[t]) with weight ww[t] into the shared
    CSR + paired-slot format. Slot 2t is uu[t]->vv[t], slot 2t+1 the reverse.
    Parallel edges are allowed and kept distinct."""
    m = int(uu.shape[0])
    uu = np.ascontiguousarray(uu, dtype=np.int64)
    vv = np.ascontiguousarray(vv, dtype=np.int64)
    cu = np.bincount(uu, minlength=n).astype(np.int64)
    cv = np.bincount(vv, minlength=n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(cu + cv, out=indptr[1:])
    nbr = np.empty(2 * m, dtype=np.int64)
    aid = np.empty(2 * m, dtype=np.int64)
    # u-side entries first within each row, then v-side
    idx_u = indptr[uu] + _group_rank(uu)
    nbr[idx_u] = vv
    aid[idx_u] = 2 * np.arange(m, dtype=np.int64)
    idx_v = indptr[vv] + cu[vv] + _group_rank(vv)
    nbr[idx_v] = uu
    aid[idx_v] = 2 * np.arange(m, dtype=np.int64) + 1
    rescap = np.empty(2 * m, dtype=np.int64)
    rescap[0::2] = ww
    rescap[1::2] = ww
    return indptr, nbr, aid, rescap


def _ragged_arange(counts: np.ndarray) -> np.ndarray:
    """Concatenation of arange(c) for each c in counts."""
    total = int(counts.sum())
    ends = np.cumsum(counts)
    return np.arange(total, dtype=np.int64) - np.repeat(ends - counts, counts)


def _csr_bfs(residual, seeds: np.ndarray, forward: bool) -> np.ndarray:
    """Level BFS over positive-residual arcs. forward=False follows arcs in
    reverse (who can reach the seeds)."""
    nn = residual.shape[0]
    if not forward:
        residual = residual.T.tocsr()
    indptr = residual.indptr
    indices = residual.indices
    data = residual.data
    seen = np.zeros(nn, dtype=bool)
    seen[seeds] = True
    frontier = seeds
    while frontier.size:
        starts = indptr[frontier].astype(np.int64)
        counts = (indptr[frontier + 1] - indptr[frontier]).astype(np.int64)
        total = int(counts.sum())
        if total == 0:
            break
        take = np.repeat(starts, counts) + _ragged_arange(counts)
        nxt = indices[take[data[take] > 0]]
        nxt = np.unique(nxt)
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return seen


def _min_cut_scipy(n, indptr, nbr, aid, rescap, tr, minimal: bool) -> np.ndarray:
    """Cut via scipy.sparse.csgraph.maximum_flow on an explicit s/t graph.

    scipy truncates capacities to int32 internally, so callers must keep
    every arc below 2^30 (parallel arcs between the same ordered pair are
    summed by the sparse constructor, at most doubling them).
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_flow

    s, t = n, n + 1
    row_nodes = np.repeat(np.arange(n, dtype=np.int64),
                          np.diff(indptr).astype(np.int64))
    cap = rescap[aid]
    keep = cap > 0
    rows = row_nodes[keep]
    cols = nbr[keep]
    caps = cap[keep]
    src = np.flatnonzero(tr > 0).astype(np.int64)
    snk = np.flatnonzero(tr < 0).astype(np.int64)
    rows = np.concatenate([rows, np.full(src.size, s, dtype=np.int64), snk])
    cols = np.concatenate([cols, src, np.full(snk.size, t, dtype=np.int64)])
    caps = np.concatenate([caps, tr[src], -tr[snk]])
    if caps.size and int(caps.max()) >= 2 ** 30:
        raise OverflowError("arc capacity exceeds the int32 solver budget")
    g = csr_matrix((caps.astype(np.int32), (rows, cols)), shape=(n + 2, n + 2))
    res = maximum_flow(g, s, t)
    residual = (g - res.flow).tocsr()
    if minimal:
        seen = _csr_bfs(residual, np.array([s], dtype=np.int64), forward=True)
        return seen[:n].copy()
    seen = _csr_bfs(residual, np.array([t], dtype=np.int64), forward=False)
    return ~seen[:n]


def min_cut(n: int, indptr: np.ndarray, nbr: np.ndarray, aid: np.ndarray,
            rescap: np.ndarray, tr: np.ndarray, minimal: bool = True) -> np.ndarray:
    """Source side of a minimum s-t cut as a bool mask over internal nodes.

    Minimizes, over cell sets F,
        sum_{i in F, tr_i < 0} (-tr_i) + sum_{i not in F, tr_i > 0} tr_i
        + sum of weights of edges with exactly one endpoint in F.
    minimal=True returns the inclusion-minimal minimizer, False the
    inclusion-maximal one; both are canonical and backend-independent.
    rescap and tr are consumed (modified in place) on the numba path.
    """
    if USE_NUMBA:
        _bk_maxflow(indptr, nbr, aid, rescap, tr)
        if minimal:
            return _source_reachable(indptr, nbr, aid, rescap, tr).astype(bool)
        return ~(_sink_reaching(indptr, nbr, aid, rescap, tr).astype(bool))
    return _min_cut_scipy(n, indptr, nbr, aid, rescap, tr, minimal)
