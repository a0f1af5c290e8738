"""Occluded-surface growth behind depth discontinuities.

Discontinuity pixels (the far side of every cut connection) are chained
into curve-like groups, split at junctions, and pruned.  Each group then
grows a one-pixel-wide wavefront of new hidden pixels per iteration, with
perpendicular constraint lines at curve endpoints stopping the growth from
spilling sideways past the silhouette.  New pixels get the average
disparity of the group pixels that spawned them and no color (mask False).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ldi import (
    DIR_OFFSET,
    DIR_ROW,
    DIRECTIONS,
    IDOWN,
    ILEFT,
    IRIGHT,
    IUP,
    IX,
    IY,
    Ldi,
    OPPOSITE,
    position_chains,
)


@dataclass(frozen=True)
class DiscontinuityPixel:
    """One cut connection, attributed to its far (back) side."""

    back: int       # LDI pixel index of the farther pixel
    front: int      # LDI pixel index of the nearer pixel across the cut
    direction: str  # direction from back toward front


@dataclass(frozen=True)
class ConstraintLine:
    """Half-plane constraint: growth stays where (p - anchor) . normal >= 0.

    The normal is the curve's endpoint tangent pointing back along the
    chain, so the forbidden side lies beyond the endpoint.
    """

    anchor: tuple[float, float]
    normal: tuple[float, float]

    def allows(self, x: float, y: float) -> bool:
        return ((x - self.anchor[0]) * self.normal[0]
                + (y - self.anchor[1]) * self.normal[1]) >= 0.0

    def signed_distance(self, x: float, y: float) -> float:
        return ((x - self.anchor[0]) * self.normal[0]
                + (y - self.anchor[1]) * self.normal[1])


@dataclass
class CurveGroup:
    """An ordered chain of discontinuity back-pixels plus growth constraints."""

    pixels: list[int]
    closed: bool = False
    constraints: list[ConstraintLine] = field(default_factory=list)
    # Junction lattice positions adjacent to either endpoint (diagnostics).
    endpoint_junctions: tuple[object, object] = (None, None)

    def __len__(self) -> int:
        return len(self.pixels)


def detect_discontinuities(ldi: Ldi, step_threshold: float = 0.05
                           ) -> list[DiscontinuityPixel]:
    """Enumerate cut edges: one entry per (far pixel, near pixel) pair.

    A pixel missing a neighbor in some direction pairs with every pixel at
    the adjacent lattice position whose disparity differs by more than the
    threshold.  Each pair yields exactly one entry, attributed to the far
    (back) side; pairs found from both sides are deduplicated.
    """
    xs, ys = ldi.index[IX], ldi.index[IY]
    d = ldi.disparity.astype(np.float64)
    head, nxt, depth = position_chains(ldi)
    w, h = ldi.width, ldi.height
    backs, fronts, dirs = [], [], []
    dir_id = {name: i for i, name in enumerate(DIRECTIONS)}
    for name in DIRECTIONS:
        row = DIR_ROW[name]
        dx, dy = DIR_OFFSET[name]
        missing = np.nonzero(ldi.index[row] < 0)[0]
        nx = xs[missing].astype(np.int64) + dx
        ny = ys[missing].astype(np.int64) + dy
        ok = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
        p = missing[ok]
        cur = head[ny[ok] * w + nx[ok]]
        for _ in range(depth):
            live = cur >= 0
            if not live.any():
                break
            pp = p[live]
            q = cur[live]
            gap = d[q] - d[pp]
            far = gap > step_threshold
            backs.append(pp[far])
            fronts.append(q[far])
            dirs.append(np.full(int(far.sum()), dir_id[name], dtype=np.int64))
            near = gap < -step_threshold
            backs.append(q[near])
            fronts.append(pp[near])
            dirs.append(np.full(int(near.sum()),
                                dir_id[OPPOSITE[name]], dtype=np.int64))
            cur = np.where(live, nxt[np.maximum(cur, 0)], -1)

    if not backs:
        return []
    back = np.concatenate(backs).astype(np.int64)
    front = np.concatenate(fronts).astype(np.int64)
    dd = np.concatenate(dirs)
    key = (back * ldi.pixel_count + front) * 4 + dd
    _, first = np.unique(key, return_index=True)
    first.sort()
    return [DiscontinuityPixel(int(back[i]), int(front[i]),
                               DIRECTIONS[int(dd[i])])
            for i in first]


def _chain_graph(ldi: Ldi, nodes: list[int], step_threshold: float):
    """8-adjacency between discontinuity nodes of similar disparity."""
    xs, ys = ldi.index[IX], ldi.index[IY]
    d = ldi.disparity
    pos_map: dict[tuple[int, int], list[int]] = {}
    for p in nodes:
        pos_map.setdefault((int(xs[p]), int(ys[p])), []).append(p)
    adj: dict[int, list[int]] = {p: [] for p in nodes}
    for p in nodes:
        px, py = int(xs[p]), int(ys[p])
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                for q in pos_map.get((px + dx, py + dy), ()):
                    if abs(float(d[p]) - float(d[q])) <= step_threshold:
                        adj[p].append(q)
    for p in adj:
        adj[p].sort()
    return adj, pos_map


def _trace_paths(adj: dict[int, list[int]], removed: set[int],
                 order: list[int]) -> list[tuple[list[int], bool]]:
    """Decompose a max-degree-2 graph into open chains and closed loops."""
    live = {p: [q for q in adj[p] if q not in removed]
            for p in adj if p not in removed}
    visited: set[int] = set()
    chains: list[tuple[list[int], bool]] = []
    # Open chains first, started from degree<=1 endpoints.
    for p in order:
        if p in removed or p in visited or len(live[p]) > 1:
            continue
        chain = [p]
        visited.add(p)
        cur, prev = p, None
        while True:
            nxt = [q for q in live[cur] if q != prev and q not in visited]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            chain.append(cur)
            visited.add(cur)
        chains.append((chain, False))
    # Remaining nodes form closed loops.
    for p in order:
        if p in removed or p in visited:
            continue
        chain = [p]
        visited.add(p)
        cur, prev = p, None
        while True:
            nxt = [q for q in live[cur] if q != prev and q not in visited]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            chain.append(cur)
            visited.add(cur)
        chains.append((chain, True))
    return chains


def group_into_curves(ldi: Ldi, disc: list[DiscontinuityPixel],
                      step_threshold: float = 0.05, min_length: int = 20
                      ) -> tuple[list[CurveGroup], list[tuple[int, int]]]:
    """Chain discontinuity pixels into curves, splitting at junctions.

    Junctions are (a) nodes where three or more chain branches of one
    surface meet, and (b) positions where a chain endpoint of one surface
    abuts a chain of a different surface (a T-junction).  Chains never
    span a junction; groups shorter than ``min_length`` are dropped.

    Returns (groups, junction positions).
    """
    xs, ys = ldi.index[IX], ldi.index[IY]
    d = ldi.disparity
    nodes = sorted({e.back for e in disc})
    if not nodes:
        return [], []
    adj, pos_map = _chain_graph(ldi, nodes, step_threshold)

    # Same-surface junctions: branch points of the chain graph.
    removed = {p for p in nodes if len(adj[p]) >= 3}
    junctions = [(int(xs[p]), int(ys[p])) for p in sorted(removed)]

    chains = _trace_paths(adj, removed, nodes)

    # Cross-surface junctions: an endpoint next to a different-depth chain.
    node_chain: dict[int, int] = {}
    for ci, (chain, _) in enumerate(chains):
        for p in chain:
            node_chain[p] = ci
    split_at: dict[int, set[int]] = {}
    for ci, (chain, closed) in enumerate(chains):
        if closed or not chain:
            continue
        for end in (chain[0], chain[-1]):
            ex, ey = int(xs[end]), int(ys[end])
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    for q in pos_map.get((ex + dx, ey + dy), ()):
                        if q == end or q in removed or q not in node_chain:
                            continue
                        if node_chain[q] == ci:
                            continue
                        if abs(float(d[end]) - float(d[q])) <= step_threshold:
                            continue  # same surface: not a T
                        qc, qchain = node_chain[q], chains[node_chain[q]][0]
                        junctions.append((int(xs[q]), int(ys[q])))
                        if q != qchain[0] and q != qchain[-1]:
                            split_at.setdefault(qc, set()).add(q)

    final: list[tuple[list[int], bool]] = []
    for ci, (chain, closed) in enumerate(chains):
        cuts = split_at.get(ci)
        if not cuts:
            final.append((chain, closed))
            continue
        if closed:
            # Rotate so a cut node is first, then treat as open.
            k = next(i for i, p in enumerate(chain) if p in cuts)
            chain = chain[k:] + chain[:k]
            closed = False
        piece: list[int] = []
        for p in chain:
            if p in cuts:
                if piece:
                    final.append((piece, False))
                piece = []
            else:
                piece.append(p)
        if piece:
            final.append((piece, False))

    groups = [CurveGroup(chain, closed) for chain, closed in final
              if len(chain) >= min_length]
    return groups, junctions


def _endpoint_tangent(positions: np.ndarray) -> np.ndarray | None:
    """Least-squares direction of the first few chain points, pointing inward.

    ``positions[0]`` is the endpoint; the returned unit vector points from
    the endpoint toward the chain interior.
    """
    pts = positions[: min(5, len(positions))].astype(np.float64)
    if len(pts) < 2:
        return None
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    evals, evecs = np.linalg.eigh(cov)
    direction = evecs[:, int(np.argmax(evals))]
    inward = pts.mean(axis=0) - pts[0]
    if np.dot(direction, inward) < 0:
        direction = -direction
    n = np.linalg.norm(direction)
    if n < 1e-12:
        return None
    return direction / n


def derive_constraints(ldi: Ldi, groups: list[CurveGroup],
                       junctions: list[tuple[int, int]]) -> list[CurveGroup]:
    """Attach perpendicular constraint lines to free curve endpoints.

    Every open endpoint gets a line through it whose normal is the endpoint
    tangent; at junctions where three or more endpoints meet, only the one
    belonging to the nearest (mid-/foreground) surface keeps its line, so
    the background can grow freely underneath.
    """
    xs, ys = ldi.index[IX], ldi.index[IY]
    d = ldi.disparity

    # endpoint records: (group idx, end idx 0/1, position, back disparity)
    endpoint_cons: dict[tuple[int, int], ConstraintLine] = {}
    records = []
    for gi, g in enumerate(groups):
        g.constraints = []
        g.endpoint_junctions = (None, None)
        if g.closed or len(g.pixels) < 2:
            continue
        pos = np.stack([xs[g.pixels], ys[g.pixels]], axis=1)
        for end_idx, ordered in ((0, pos), (1, pos[::-1])):
            tangent = _endpoint_tangent(ordered)
            if tangent is None:
                continue
            anchor = (float(ordered[0][0]), float(ordered[0][1]))
            endpoint_cons[(gi, end_idx)] = ConstraintLine(
                anchor, (float(tangent[0]), float(tangent[1])))
            back_d = float(d[g.pixels[0 if end_idx == 0 else -1]])
            records.append((gi, end_idx, anchor, back_d))

    # Junction filtering: keep only the nearest-surface constraint where
    # three or more endpoints meet.
    junction_marks: dict[tuple[int, int], object] = {}
    for jpos in junctions:
        incident = [r for r in records
                    if max(abs(r[2][0] - jpos[0]), abs(r[2][1] - jpos[1])) <= 1.0]
        if len({(r[0], r[1]) for r in incident}) < 3:
            continue
        keep = max(incident, key=lambda r: (r[3], -r[0], -r[1]))
        for r in incident:
            junction_marks[(r[0], r[1])] = jpos
            if (r[0], r[1]) != (keep[0], keep[1]):
                endpoint_cons.pop((r[0], r[1]), None)

    for gi, g in enumerate(groups):
        cons = []
        marks = [junction_marks.get((gi, 0)), junction_marks.get((gi, 1))]
        for end_idx in (0, 1):
            line = endpoint_cons.get((gi, end_idx))
            if line is not None:
                cons.append(line)
        g.constraints = cons
        g.endpoint_junctions = (marks[0], marks[1])
    return groups


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Lower index wins so ordering stays deterministic.
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra
        return ra


class _GrowState:
    """Array-backed LDI under construction, sized for the maximum growth.

    A per-position singly linked list (``head``/``nxt``) answers "which
    pixels live at this position" with pure gathers, which keeps the whole
    candidate/commit cycle vectorized.
    """

    def __init__(self, ldi: Ldi, capacity: int):
        k0 = ldi.pixel_count
        self.k = k0
        self.xs = np.empty(capacity, dtype=np.int64)
        self.ys = np.empty(capacity, dtype=np.int64)
        self.disp = np.empty(capacity, dtype=np.float64)
        self.xs[:k0] = ldi.index[IX]
        self.ys[:k0] = ldi.index[IY]
        self.disp[:k0] = ldi.disparity
        self.nbr = {}
        for name in DIRECTIONS:
            row = np.full(capacity, -1, dtype=np.int64)
            row[:k0] = ldi.index[DIR_ROW[name]]
            self.nbr[name] = row
        self.owner = np.full(capacity, -1, dtype=np.int64)

        n_cells = ldi.width * ldi.height
        head, nxt, depth = position_chains(ldi)
        self.head = head
        self.nxt = np.full(capacity, -1, dtype=np.int64)
        self.nxt[:k0] = nxt
        self.depth_of_chain = max(depth, 1)
        pos = self.ys[:k0] * ldi.width + self.xs[:k0]
        from .ldi import per_cell_extreme
        self.max_d = per_cell_extreme(pos, self.disp[:k0], n_cells, "max", 0.0)

    def _ensure(self, extra: int) -> None:
        need = self.k + extra
        cap = len(self.xs)
        if need <= cap:
            return
        new_cap = max(need, cap * 2)
        for attr in ("xs", "ys", "owner", "nxt"):
            old = getattr(self, attr)
            grown = np.full(new_cap, -1, dtype=old.dtype)
            grown[: self.k] = old[: self.k]
            setattr(self, attr, grown)
        grown = np.empty(new_cap, dtype=self.disp.dtype)
        grown[: self.k] = self.disp[: self.k]
        self.disp = grown
        for name in DIRECTIONS:
            old = self.nbr[name]
            grown = np.full(new_cap, -1, dtype=old.dtype)
            grown[: self.k] = old[: self.k]
            self.nbr[name] = grown

    def append(self, cells: np.ndarray, w: int, d: np.ndarray,
               owner: int) -> np.ndarray:
        n = len(cells)
        self._ensure(n)
        ids = np.arange(self.k, self.k + n)
        self.xs[ids] = cells % w
        self.ys[ids] = cells // w
        self.disp[ids] = d
        self.owner[ids] = owner
        self.nxt[ids] = self.head[cells]
        self.head[cells] = ids
        np.maximum.at(self.max_d, cells, d)
        self.k += n
        return ids


def expand(ldi: Ldi, groups: list[CurveGroup], iterations: int = 50,
           step_threshold: float = 0.05,
           stats: dict | None = None) -> Ldi:
    """Grow hidden geometry behind discontinuities for ``iterations`` rounds.

    Per round each group advances a one-pixel wavefront: candidates are the
    free neighbor slots of the current front, kept only where a strictly
    nearer pixel already exists at the position (the growth stays hidden)
    and where every constraint line of the group allows it.  Groups whose
    fronts collide within the disparity threshold are merged and grow on as
    one unit.  New pixels connect to every depth-compatible pixel at
    adjacent positions with a free opposing slot (closest disparity wins,
    ties to the lower pixel id).
    """
    w, h = ldi.width, ldi.height
    tau = step_threshold
    k0 = ldi.pixel_count

    front_sizes = sum(len(g.pixels) for g in groups)
    capacity = k0 + max(iterations, 1) * max(front_sizes, 1) * 2 + 16
    st = _GrowState(ldi, capacity)

    uf = _UnionFind(len(groups))
    fronts: dict[int, np.ndarray] = {
        gi: np.asarray(g.pixels, dtype=np.int64) for gi, g in enumerate(groups)}
    cons: dict[int, list[ConstraintLine]] = {gi: list(g.constraints)
                                             for gi, g in enumerate(groups)}
    for gi, g in enumerate(groups):
        st.owner[np.asarray(g.pixels, dtype=np.int64)] = gi

    dir_items = [(name, DIR_OFFSET[name]) for name in DIRECTIONS]
    per_iter_new: list[int] = []

    def chain_best(cells: np.ndarray, d_new: np.ndarray, opposite: str | None
                   ) -> tuple[np.ndarray, np.ndarray]:
        """Per cell: pixel with min |disp - d_new| (tie: lower id).

        With ``opposite`` set, only pixels whose slot in that direction is
        free are considered (connection candidates); gap must be <= tau.
        """
        best = np.full(len(cells), -1, dtype=np.int64)
        best_gap = np.full(len(cells), np.inf)
        cur = st.head[cells]
        for _ in range(st.depth_of_chain + 1):
            live = cur >= 0
            if not live.any():
                break
            q = np.maximum(cur, 0)
            gap = np.abs(st.disp[q] - d_new)
            ok = live & (gap <= tau)
            if opposite is not None:
                ok &= st.nbr[opposite][q] < 0
            better = ok & ((gap < best_gap)
                           | ((gap == best_gap) & (q < best)))
            best[better] = q[better]
            best_gap[better] = gap[better]
            cur = np.where(live, st.nxt[q], -1)
        return best, best_gap

    for _ in range(iterations):
        created = 0
        roots = sorted({uf.find(gi) for gi in fronts if len(fronts[gi])})
        merged_fronts: dict[int, list[np.ndarray]] = {}
        merged_cons: dict[int, list[ConstraintLine]] = {}
        for gi in list(fronts):
            r = uf.find(gi)
            merged_fronts.setdefault(r, []).append(fronts[gi])
            merged_cons.setdefault(r, [])
            for c in cons[gi]:
                if c not in merged_cons[r]:
                    merged_cons[r].append(c)
        fronts = {r: np.concatenate(v) for r, v in merged_fronts.items()}
        cons = merged_cons

        for r in roots:
            front = fronts.get(r)
            if front is None or len(front) == 0:
                continue
            lines = cons[r]

            cand_cells = []
            cand_disp = []
            fx = st.xs[front]
            fy = st.ys[front]
            fd = st.disp[front]
            for name, (dx, dy) in dir_items:
                free = st.nbr[name][front] < 0
                nx = fx + dx
                ny = fy + dy
                ok = free & (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
                if lines:
                    cx = nx.astype(np.float64)
                    cy = ny.astype(np.float64)
                    for line in lines:
                        ok &= ((cx - line.anchor[0]) * line.normal[0]
                               + (cy - line.anchor[1]) * line.normal[1]) >= 0.0
                if ok.any():
                    cand_cells.append((ny[ok] * w + nx[ok]))
                    cand_disp.append(fd[ok])
            if not cand_cells:
                fronts[r] = front[:0]
                continue
            cells_all = np.concatenate(cand_cells)
            disp_all = np.concatenate(cand_disp)
            cells, inverse = np.unique(cells_all, return_inverse=True)
            sums = np.zeros(len(cells))
            counts = np.zeros(len(cells))
            np.add.at(sums, inverse, disp_all)
            np.add.at(counts, inverse, 1.0)
            d_new = sums / counts

            hidden = st.max_d[cells] > d_new
            cells = cells[hidden]
            d_new = d_new[hidden]
            if len(cells) == 0:
                fronts[r] = front[:0]
                continue

            # Same-surface duplicates merge groups instead of committing.
            dup_q, _ = chain_best(cells, d_new, opposite=None)
            dup = dup_q >= 0
            for q in dup_q[dup]:
                qo = int(st.owner[q])
                if qo >= 0 and uf.find(qo) != r:
                    uf.union(uf.find(qo), r)
            cells = cells[~dup]
            d_new = d_new[~dup]
            if len(cells) == 0:
                fronts[r] = front[:0]
                continue

            ids = st.append(cells, w, d_new, r)
            st.depth_of_chain += 1
            created += len(ids)
            if stats is not None:
                stats.setdefault("commits", []).append((ids, tuple(lines)))

            # Stitch connections (new pixels already registered, so
            # same-batch siblings connect too).
            for name, (dx, dy) in dir_items:
                ax = st.xs[ids] + dx
                ay = st.ys[ids] + dy
                ok = (ax >= 0) & (ax < w) & (ay >= 0) & (ay < h)
                if not ok.any():
                    continue
                sel = ids[ok]
                acells = ay[ok] * w + ax[ok]
                q, _ = chain_best(acells, st.disp[sel], OPPOSITE[name])
                hit = q >= 0
                if not hit.any():
                    continue
                src = sel[hit]
                tgt = q[hit]
                st.nbr[name][src] = tgt
                st.nbr[OPPOSITE[name]][tgt] = src
                for qo in np.unique(st.owner[tgt]):
                    if qo >= 0 and uf.find(int(qo)) != r:
                        uf.union(uf.find(int(qo)), r)

            fronts[r] = ids
        per_iter_new.append(created)
        if created == 0:
            break

    if stats is not None:
        stats["new_per_iteration"] = per_iter_new
        stats["new_pixels"] = int(sum(per_iter_new))

    k = st.k
    values = np.zeros((ldi.channels, k), dtype=np.float32)
    values[: ldi.channels - 1, :k0] = ldi.colors
    values[-1] = st.disp[:k]
    index = np.empty((6, k), dtype=np.int32)
    index[IX] = st.xs[:k]
    index[IY] = st.ys[:k]
    index[ILEFT] = st.nbr["left"][:k]
    index[IRIGHT] = st.nbr["right"][:k]
    index[IUP] = st.nbr["up"][:k]
    index[IDOWN] = st.nbr["down"][:k]
    mask = np.zeros(k, dtype=bool)
    mask[:k0] = ldi.mask
    return Ldi(values, index, mask, w, h, copy=False)


def grow_occluded_geometry(ldi: Ldi, step_threshold: float = 0.05,
                           iterations: int = 50, min_length: int = 20,
                           stats: dict | None = None) -> Ldi:
    """Full stage: detect, group, constrain, expand."""
    disc = detect_discontinuities(ldi, step_threshold)
    groups, junctions = group_into_curves(ldi, disc, step_threshold, min_length)
    derive_constraints(ldi, groups, junctions)
    if stats is not None:
        stats["discontinuities"] = len(disc)
        stats["groups"] = len(groups)
        stats["junctions"] = len(junctions)
    return expand(ldi, groups, iterations, step_threshold, stats=stats)
