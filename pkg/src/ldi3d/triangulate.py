"""Polygon triangulation: plane-sweep monotone decomposition + fans.

Input polygons come from chart outlines: an outer ring with positive
shoelace area (interior to the left of directed edges) and optional hole
rings with negative area.  Interior constraint vertices (stud points) are
inserted into the finished triangulation by face/edge splits followed by
local edge flips for shape quality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

_EPS_AREA = 1e-12


def ring_area(points: np.ndarray) -> float:
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _above(p, q) -> bool:
    """Sweep order: larger y first, ties broken by smaller x."""
    return p[1] > q[1] or (p[1] == q[1] and p[0] < q[0])


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


START, END, SPLIT, MERGE, REGULAR = range(5)


class _Sweep:
    """Monotone decomposition of a ring set via the classic sweep."""

    def __init__(self, rings: list[np.ndarray]):
        self.pts: list[tuple[float, float]] = []
        self.next: list[int] = []
        self.prev: list[int] = []
        for ring in rings:
            base = len(self.pts)
            n = len(ring)
            if n < 3:
                raise GeometryError("ring with fewer than 3 vertices")
            for p in ring:
                self.pts.append((float(p[0]), float(p[1])))
            for i in range(n):
                self.next.append(base + (i + 1) % n)
                self.prev.append(base + (i - 1) % n)
        self.diagonals: list[tuple[int, int]] = []
        self.active: list[int] = []        # edge ids = origin vertex index
        self.helper: dict[int, int] = {}

    def _classify(self, v: int) -> int:
        p = self.pts[v]
        u = self.pts[self.prev[v]]
        w = self.pts[self.next[v]]
        up_u = _above(u, p)
        up_w = _above(w, p)
        turn = _cross(u, p, w)
        if not up_u and not up_w:
            return START if turn > 0 else SPLIT
        if up_u and up_w:
            return END if turn > 0 else MERGE
        return REGULAR

    def _edge_x(self, e: int, y: float, qx: float) -> float:
        p = self.pts[e]
        q = self.pts[self.next[e]]
        if p[1] == q[1]:
            return min(p[0], q[0])
        t = (y - p[1]) / (q[1] - p[1])
        t = min(max(t, 0.0), 1.0)
        return p[0] + t * (q[0] - p[0])

    def _left_edge(self, v: int) -> int | None:
        p = self.pts[v]
        best, best_x = None, None
        for e in self.active:
            x = self._edge_x(e, p[1], p[0])
            if x <= p[0] and (best_x is None or x > best_x):
                best, best_x = e, x
        return best

    def _fix_up(self, v: int, e: int):
        h = self.helper.get(e)
        if h is not None and self._types[h] == MERGE:
            self.diagonals.append((v, h))
        self.helper[e] = v

    def run(self) -> list[tuple[int, int]]:
        order = sorted(range(len(self.pts)),
                       key=lambda i: (-self.pts[i][1], self.pts[i][0], i))
        self._types = [self._classify(v) for v in range(len(self.pts))]
        for v in order:
            t = self._types[v]
            p = self.pts[v]
            if t == START:
                self.active.append(v)
                self.helper[v] = v
            elif t == END:
                e = self.prev[v]
                h = self.helper.get(e)
                if h is not None and self._types[h] == MERGE:
                    self.diagonals.append((v, h))
                if e in self.active:
                    self.active.remove(e)
            elif t == SPLIT:
                le = self._left_edge(v)
                if le is not None:
                    h = self.helper.get(le, le)
                    self.diagonals.append((v, h))
                    self.helper[le] = v
                self.active.append(v)
                self.helper[v] = v
            elif t == MERGE:
                e = self.prev[v]
                h = self.helper.get(e)
                if h is not None and self._types[h] == MERGE:
                    self.diagonals.append((v, h))
                if e in self.active:
                    self.active.remove(e)
                le = self._left_edge(v)
                if le is not None:
                    self._fix_up(v, le)
            else:  # REGULAR
                if _above(self.pts[self.prev[v]], p):
                    # interior lies right of v: chain descends through v
                    e = self.prev[v]
                    h = self.helper.get(e)
                    if h is not None and self._types[h] == MERGE:
                        self.diagonals.append((v, h))
                    if e in self.active:
                        self.active.remove(e)
                    self.active.append(v)
                    self.helper[v] = v
                else:
                    le = self._left_edge(v)
                    if le is not None:
                        self._fix_up(v, le)
        return self.diagonals


def _extract_faces(pts, ring_next, diagonals):
    """Faces of the subdivision (ring edges + diagonal twins), by angle walk."""
    edges: list[tuple[int, int]] = []
    for v, nxt in enumerate(ring_next):
        edges.append((v, nxt))
    for a, b in diagonals:
        edges.append((a, b))
        edges.append((b, a))

    out_by_vertex: dict[int, list[int]] = {}
    for ei, (a, b) in enumerate(edges):
        out_by_vertex.setdefault(a, []).append(ei)

    def angle(ei):
        a, b = edges[ei]
        return math.atan2(pts[b][1] - pts[a][1], pts[b][0] - pts[a][0])

    for v in out_by_vertex:
        out_by_vertex[v].sort(key=lambda ei: (angle(ei), edges[ei][1]))

    # Successor of (a -> b): among edges leaving b, the clockwise-closest to
    # the reversed direction (b -> a); the exact reverse is the last resort.
    succ = [0] * len(edges)
    for ei, (a, b) in enumerate(edges):
        back_angle = math.atan2(pts[a][1] - pts[b][1], pts[a][0] - pts[b][0])
        best, best_delta = None, None
        for oe in out_by_vertex[b]:
            delta = (back_angle - angle(oe)) % (2 * math.pi)
            if delta <= 1e-12:
                delta += 2 * math.pi
            if best is None or delta < best_delta:
                best, best_delta = oe, delta
        succ[ei] = best

    faces = []
    visited = [False] * len(edges)
    for ei in range(len(edges)):
        if visited[ei]:
            continue
        face = []
        cur = ei
        while not visited[cur]:
            visited[cur] = True
            face.append(edges[cur][0])
            cur = succ[cur]
        faces.append(face)
    return faces


def _triangulate_monotone(pts, face: list[int]) -> list[tuple[int, int, int]]:
    """Stack triangulation of a y-monotone face (vertex index list, CCW).

    Operates on positions within the face so repeated vertex ids (pinched
    outlines) stay distinct.
    """
    n = len(face)
    if n < 3:
        return []
    if n == 3:
        return [tuple(face)]

    def key(i):
        v = face[i]
        return (-pts[v][1], pts[v][0], v)

    top_i = min(range(n), key=key)
    bot_i = max(range(n), key=key)

    chain = ["L"] * n  # successor walk from top descends the left chain
    i = top_i
    while i != bot_i:
        chain[i] = "L"
        i = (i + 1) % n
    chain[bot_i] = "B"
    i = (top_i - 1) % n
    while i != bot_i:
        chain[i] = "R"
        i = (i - 1) % n
    chain[top_i] = "T"

    merged = sorted(range(n), key=key)
    tris: list[tuple[int, int, int]] = []

    def emit(ia, ib, ic):
        a, b, c = face[ia], face[ib], face[ic]
        area = _cross(pts[a], pts[b], pts[c])
        if abs(area) <= _EPS_AREA:
            return
        tris.append((a, b, c) if area > 0 else (a, c, b))

    def same_side(i, j):
        ci, cj = chain[i], chain[j]
        return ci == cj or "T" in (ci, cj)

    stack = [merged[0], merged[1]]
    for k in range(2, n):
        iv = merged[k]
        if chain[iv] != "B" and same_side(iv, stack[-1]):
            while len(stack) > 1:
                ia, ib = stack[-1], stack[-2]
                va, vb, vv = face[ia], face[ib], face[iv]
                if chain[iv] == "L":
                    ok = _cross(pts[vv], pts[vb], pts[va]) > _EPS_AREA
                else:
                    ok = _cross(pts[vv], pts[va], pts[vb]) > _EPS_AREA
                if not ok:
                    break
                emit(iv, ia, ib)
                stack.pop()
            stack.append(iv)
        else:
            old_top = stack[-1]
            while len(stack) > 1:
                emit(iv, stack[-1], stack[-2])
                stack.pop()
            stack = [old_top, iv]
    return tris


def _proper_cross(p1, p2, q1, q2) -> bool:
    """Strict segment crossing; shared endpoints do not count."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0)
            and abs(d1) > 1e-12 and abs(d2) > 1e-12
            and abs(d3) > 1e-12 and abs(d4) > 1e-12)


def find_self_intersection(rings: list[np.ndarray]) -> tuple | None:
    """First properly crossing edge pair across all rings, or None.

    Returns ((ring, edge), (ring, edge)) identifying the offending pair.
    """
    edges = []
    for ri, ring in enumerate(rings):
        n = len(ring)
        for i in range(n):
            edges.append((ri, i, ring[i], ring[(i + 1) % n]))
    for a in range(len(edges)):
        ra, ia, p1, p2 = edges[a]
        for b in range(a + 1, len(edges)):
            rb, ib, q1, q2 = edges[b]
            if ra == rb:
                n = len(rings[ra])
                if ib == (ia + 1) % n or ia == (ib + 1) % n:
                    continue  # adjacent edges share a vertex
            if (tuple(p1) in (tuple(q1), tuple(q2))
                    or tuple(p2) in (tuple(q1), tuple(q2))):
                continue
            if _proper_cross(p1, p2, q1, q2):
                return (ra, ia), (rb, ib)
    return None


def triangulate_polygon(rings: list[np.ndarray], validate: bool = True
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Triangulate a polygon with holes.

    Returns (points (N, 2), triangles (M, 3) CCW indices).  Vertices keep
    the ring order: ring 0 vertices first, then ring 1, etc.

    Raises:
        GeometryError: naming the edge pair, if the input self-intersects.
    """
    rings = [np.asarray(r, dtype=np.float64) for r in rings]
    if ring_area(rings[0]) < 0:
        raise GeometryError("outer ring must have positive area")
    for hole in rings[1:]:
        if ring_area(hole) > 0:
            raise GeometryError("hole rings must have negative area")
    hit = find_self_intersection(rings) if validate else None
    if hit is not None:
        raise GeometryError(
            f"polygon self-intersects: ring {hit[0][0]} edge {hit[0][1]} "
            f"crosses ring {hit[1][0]} edge {hit[1][1]}")
    sweep = _Sweep(rings)
    diagonals = sweep.run()
    pts = sweep.pts
    faces = _extract_faces(pts, sweep.next, diagonals)

    tris: list[tuple[int, int, int]] = []
    for face in faces:
        if len(face) < 3:
            continue
        area = ring_area(np.array([pts[v] for v in face]))
        if area <= _EPS_AREA:
            continue  # outer face or degenerate sliver
        tris.extend(_triangulate_monotone(pts, face))
    return np.array(pts, dtype=np.float64), np.array(tris, dtype=np.int64)


# ---------------------------------------------------------------------------
# Interior (Steiner) point insertion with local edge flips.

def _in_circle(a, b, c, d) -> float:
    adx = a[0] - d[0]
    ady = a[1] - d[1]
    bdx = b[0] - d[0]
    bdy = b[1] - d[1]
    cdx = c[0] - d[0]
    cdy = c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (adx * (bdy * cd - bd * cdy)
            - ady * (bdx * cd - bd * cdx)
            + ad * (bdx * cdy - bdy * cdx))


class _TriMesh:
    """Triangle soup with an incrementally maintained edge map.

    Supports interior point insertion (face or edge split) and local
    Lawson flips around the inserted vertex.
    """

    def __init__(self, points: np.ndarray, tris: np.ndarray):
        self.pts: list[tuple[float, float]] = [tuple(p) for p in points]
        self.tris: list[tuple[int, int, int] | None] = []
        self.edge_map: dict[tuple[int, int], list[int]] = {}
        self.boundary: set[tuple[int, int]] = set()
        self.hint = 0
        for t in tris:
            self._add(tuple(int(v) for v in t))
        for e, faces in self.edge_map.items():
            if len(faces) == 1:
                self.boundary.add(e)

    def _add(self, t: tuple[int, int, int]) -> int:
        ti = len(self.tris)
        self.tris.append(t)
        for i in range(3):
            e = (t[i], t[(i + 1) % 3])
            key = (e[0], e[1]) if e[0] < e[1] else (e[1], e[0])
            self.edge_map.setdefault(key, []).append(ti)
        return ti

    def _remove(self, ti: int) -> None:
        t = self.tris[ti]
        self.tris[ti] = None
        for i in range(3):
            e = (t[i], t[(i + 1) % 3])
            key = (e[0], e[1]) if e[0] < e[1] else (e[1], e[0])
            faces = self.edge_map.get(key)
            if faces is not None and ti in faces:
                faces.remove(ti)
                if not faces:
                    del self.edge_map[key]

    def _contains(self, ti: int, p) -> tuple[bool, tuple[int, int] | None]:
        t = self.tris[ti]
        ax, ay = self.pts[t[0]]
        bx, by = self.pts[t[1]]
        cx, cy = self.pts[t[2]]
        px, py = p
        eps = 1e-9
        d0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if d0 < -eps:
            return False, None
        d1 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
        if d1 < -eps:
            return False, None
        d2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
        if d2 < -eps:
            return False, None
        if d0 <= eps:
            return True, (t[0], t[1])
        if d1 <= eps:
            return True, (t[1], t[2])
        if d2 <= eps:
            return True, (t[2], t[0])
        return True, None

    def locate(self, p) -> tuple[int, tuple[int, int] | None]:
        """Greedy walk from the last hit toward p; full scan as fallback.

        A visited set stops orientation-noise cycles on sliver triangles.
        """
        ti = self.hint
        if ti >= len(self.tris) or self.tris[ti] is None:
            ti = next((i for i, t in enumerate(self.tris) if t is not None), -1)
        px, py = p
        visited = set()
        while ti >= 0 and ti not in visited:
            visited.add(ti)
            t = self.tris[ti]
            # Cross the unvisited edge with the most negative orientation.
            worst, worst_d = -1, -1e-9
            inside = True
            for i in range(3):
                a, b = t[i], t[(i + 1) % 3]
                ax, ay = self.pts[a]
                bx, by = self.pts[b]
                d = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                if d < -1e-9:
                    inside = False
                    if d < worst_d:
                        key = (a, b) if a < b else (b, a)
                        faces = self.edge_map.get(key, ())
                        for f in faces:
                            if f != ti and f not in visited:
                                worst, worst_d = f, d
                                break
            if inside:
                ok, edge = self._contains(ti, p)
                if ok:
                    self.hint = ti
                    return ti, edge
                break
            if worst < 0:
                break
            ti = worst
        for ti, t in enumerate(self.tris):  # robust fallback
            if t is None:
                continue
            inside, edge = self._contains(ti, p)
            if inside:
                self.hint = ti
                return ti, edge
        return -1, None

    def insert(self, p, hint: int | None = None) -> int | None:
        p = tuple(p)
        if hint is not None and hint < len(self.tris) and \
                self.tris[hint] is not None:
            self.hint = hint
        ti, edge = self.locate(p)
        if ti < 0:
            return None
        for v in self.tris[ti]:
            if self.pts[v] == p:
                return v  # coincides with an existing vertex
        vi = len(self.pts)
        self.pts.append(p)
        dirty: list[tuple[int, int, int]] = []
        if edge is None:
            a, b, c = self.tris[ti]
            self._remove(ti)
            dirty += [(a, b, vi), (b, c, vi), (c, a, vi)]
        else:
            key = (edge[0], edge[1]) if edge[0] < edge[1] else (edge[1], edge[0])
            for tj in list(self.edge_map.get(key, ())):
                t = self.tris[tj]
                other = [v for v in t if v not in key][0]
                self._remove(tj)
                dirty += [(key[0], other, vi), (other, key[1], vi)]
            if key in self.boundary:
                self.boundary.discard(key)
                self.boundary.add(tuple(sorted((key[0], vi))))
                self.boundary.add(tuple(sorted((key[1], vi))))
        queue = []
        for (a, b, c) in dirty:
            if abs(_cross(self.pts[a], self.pts[b], self.pts[c])) <= _EPS_AREA:
                continue
            if _cross(self.pts[a], self.pts[b], self.pts[c]) < 0:
                a, b = b, a
            self._add((a, b, c))
            for e in ((a, b), (b, c), (c, a)):
                if vi not in e:
                    queue.append(e)
        self._legalize(vi, queue)
        return vi

    def _legalize(self, vi: int, queue: list[tuple[int, int]],
                  cascade: bool = False) -> None:
        guard = 0
        while queue and guard < 1000:
            guard += 1
            a, b = queue.pop()
            key = (a, b) if a < b else (b, a)
            if key in self.boundary:
                continue
            faces = self.edge_map.get(key, ())
            if len(faces) != 2:
                continue
            t1, t2 = faces
            o1 = [v for v in self.tris[t1] if v not in key][0]
            o2 = [v for v in self.tris[t2] if v not in key][0]
            if o2 == vi:
                t1, t2, o1, o2 = t2, t1, o2, o1
            if o1 != vi:
                continue
            aa, bb = key
            quad_ok = (_cross(self.pts[o1], self.pts[aa], self.pts[o2]) > 0
                       and _cross(self.pts[o2], self.pts[bb], self.pts[o1]) > 0)
            if not quad_ok:
                continue
            if _in_circle(self.pts[aa], self.pts[bb], self.pts[o1],
                          self.pts[o2]) <= 1e-12:
                continue
            self._remove(t1)
            self._remove(t2)
            for (x, y, z) in ((o1, aa, o2), (o2, bb, o1)):
                if _cross(self.pts[x], self.pts[y], self.pts[z]) < 0:
                    y, z = z, y
                if abs(_cross(self.pts[x], self.pts[y], self.pts[z])) <= _EPS_AREA:
                    continue
                self._add((x, y, z))
            if cascade:
                queue.append((aa, o2))
                queue.append((o2, bb))

    def result(self) -> tuple[np.ndarray, np.ndarray]:
        tris = [t for t in self.tris if t is not None]
        return (np.array(self.pts, dtype=np.float64),
                np.array(tris, dtype=np.int64).reshape(-1, 3))


def triangulate_with_points(rings: list[np.ndarray],
                            interior: np.ndarray | list,
                            validate: bool = True
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Polygon-with-holes triangulation using interior constraint vertices.

    Interior points are inserted after the sweep triangulation; points
    falling on an edge split it so both neighbors stay consistent.
    """
    pts, tris = triangulate_polygon(rings, validate=validate)
    mesh = _TriMesh(pts, tris)
    interior = np.asarray(interior, dtype=np.float64).reshape(-1, 2)
    hints = np.full(len(interior), -1, dtype=np.int64)
    if len(interior) and len(tris):
        # Vectorized first location against the sweep triangulation; later
        # splits invalidate some entries, which the walk recovers locally.
        a = pts[tris[:, 0]][:, None, :]
        b = pts[tris[:, 1]][:, None, :]
        c = pts[tris[:, 2]][:, None, :]
        p = interior[None, :, :]
        eps = 1e-9
        d0 = ((b[..., 0] - a[..., 0]) * (p[..., 1] - a[..., 1])
              - (b[..., 1] - a[..., 1]) * (p[..., 0] - a[..., 0]))
        d1 = ((c[..., 0] - b[..., 0]) * (p[..., 1] - b[..., 1])
              - (c[..., 1] - b[..., 1]) * (p[..., 0] - b[..., 0]))
        d2 = ((a[..., 0] - c[..., 0]) * (p[..., 1] - c[..., 1])
              - (a[..., 1] - c[..., 1]) * (p[..., 0] - c[..., 0]))
        inside = (d0 >= -eps) & (d1 >= -eps) & (d2 >= -eps)
        found = inside.any(axis=0)
        hints[found] = np.argmax(inside, axis=0)[found]
    for p, hint in zip(interior, hints):
        mesh.insert(tuple(p), hint=int(hint) if hint >= 0 else None)
    return mesh.result()
