"""Chart outlines to a simplified textured 3D mesh.

Charts become detailed grid polygons (vertices at pixel corners), their
boundaries are split into segments shared between chart pairs, and each
segment is Douglas-Peucker simplified exactly once so adjacent charts stay
watertight.  Vertical stud polylines supply interior vertices, the plane
sweep triangulates, and vertices are lifted along camera rays at depths
sampled consistently per shared corner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .atlas import AtlasLayout, Chart, ChartSet
from .errors import GeometryError
from .ldi import Camera, DIR_ROW, IX, IY, Ldi
from .triangulate import ring_area, triangulate_with_points

SILHOUETTE = -1

# Directed boundary edges around cell (x, y) in integer corner space
# (corner (cx, cy) sits at lattice (cx - 0.5, cy - 0.5)); interior is on
# the left, so outer rings get positive shoelace area.
_SIDE = {
    "up": ((0, 0), (1, 0)),
    "down": ((1, 1), (0, 1)),
    "left": ((0, 1), (0, 0)),
    "right": ((1, 0), (1, 1)),
}


@dataclass
class Ring:
    """Closed boundary loop: integer corner points and per-edge tags."""

    corners: np.ndarray  # (n, 2) int corner coords
    tags: np.ndarray     # (n,) neighbor chart id per edge i -> i+1, -1 none

    def area(self) -> float:
        return ring_area(self.corners.astype(np.float64))


def extract_outline(chart: Chart, ldi: Ldi, chart_of: np.ndarray) -> list[Ring]:
    """Boundary rings of a chart with per-edge adjacency tags.

    The outer ring has positive area; holes are negative.  At pinch corners
    the trace turns back around its own cell so rings never cross.
    """
    grid = chart.local_grid(ldi)
    h, w = grid.shape
    member = grid >= 0

    # Vectorized boundary-edge harvest, one pass per side.
    edges: dict[tuple[int, int], list[tuple[tuple[int, int], int]]] = {}
    offs = {"up": (0, -1), "down": (0, 1), "left": (-1, 0), "right": (1, 0)}
    for name, ((ax, ay), (bx, by)) in _SIDE.items():
        dx, dy = offs[name]
        # neighbor_member[y, x] = member[y + dy, x + dx], False off-grid
        neighbor_member = np.zeros_like(member)
        ys_lo, ys_hi = max(0, -dy), h + min(0, -dy)
        xs_lo, xs_hi = max(0, -dx), w + min(0, -dx)
        neighbor_member[ys_lo:ys_hi, xs_lo:xs_hi] = \
            member[ys_lo + dy:ys_hi + dy, xs_lo + dx:xs_hi + dx]
        open_side = member & ~neighbor_member
        ys, xs_ = np.nonzero(open_side)
        if len(ys) == 0:
            continue
        p = grid[ys, xs_]
        q = ldi.index[DIR_ROW[name], p]
        tags = np.where(q >= 0, chart_of[np.maximum(q, 0)], SILHOUETTE)
        sx = xs_ + ax + chart.x0
        sy = ys + ay + chart.y0
        ex = xs_ + bx + chart.x0
        ey = ys + by + chart.y0
        for i in range(len(ys)):
            edges.setdefault((int(sx[i]), int(sy[i])), []).append(
                ((int(ex[i]), int(ey[i])), int(tags[i])))

    for outs in edges.values():
        outs.sort()
    rings: list[Ring] = []

    def pop_next(start, indir):
        outs = edges.get(start)
        if not outs:
            return None
        if len(outs) == 1 or indir is None:
            return outs.pop(0)
        best_i, best_c = 0, None
        for i, (end, _) in enumerate(outs):
            d = (end[0] - start[0], end[1] - start[1])
            c = indir[0] * d[1] - indir[1] * d[0]
            if best_c is None or c > best_c:
                best_i, best_c = i, c
        return outs.pop(best_i)

    for start in sorted(edges):
        while edges.get(start):
            corners = [start]
            tags = []
            (cur, tag) = edges[start].pop(0)
            tags.append(tag)
            indir = (cur[0] - start[0], cur[1] - start[1])
            while cur != start:
                corners.append(cur)
                nxt = pop_next(cur, indir)
                if nxt is None:
                    raise GeometryError(f"open boundary chain at {cur} in "
                                        f"chart {chart.id}")
                (nxt_pt, tag) = nxt
                tags.append(tag)
                indir = (nxt_pt[0] - cur[0], nxt_pt[1] - cur[1])
                cur = nxt_pt
            rings.append(Ring(np.array(corners, dtype=np.int64),
                              np.array(tags, dtype=np.int64)))
    return rings


@dataclass
class Segment:
    """A boundary run between two charts (or one chart and a silhouette).

    Simplified exactly once; both charts assemble their polygons from the
    same simplified points, guaranteeing a watertight fit.
    """

    charts: tuple[int, int]     # (chart id, neighbor id or -1), sorted
    points: np.ndarray          # (n, 2) int corners; closed rings omit the
    closed: bool                # repeated endpoint
    simplified: np.ndarray | None = None
    insertions: list[tuple[int, float, tuple[float, float]]] = field(
        default_factory=list)   # (edge index, parameter, point)
    final: np.ndarray | None = None  # simplified + stud anchors, float


def _canonical_open(points: np.ndarray) -> tuple[np.ndarray, bool]:
    fwd = points
    rev = points[::-1]
    if fwd.tobytes() <= rev.tobytes():
        return fwd, True
    return rev.copy(), False


def _canonical_closed(points: np.ndarray) -> tuple[np.ndarray, bool, int]:
    n = len(points)
    start = min(range(n), key=lambda i: (points[i, 0], points[i, 1]))
    fwd = np.roll(points, -start, axis=0)
    rev = fwd[::-1].copy()
    rev = np.roll(rev, 1, axis=0)  # keep the anchor first after reversal
    if fwd.tobytes() <= rev.tobytes():
        return fwd, True, start
    return rev, False, start


class SegmentStore:
    def __init__(self):
        self.segments: dict[bytes, Segment] = {}

    def intern(self, cid: int, tag: int, points: np.ndarray, closed: bool
               ) -> tuple[Segment, bool]:
        """Register a boundary run; returns (segment, forward orientation)."""
        pair = tuple(sorted((cid, tag)))
        if closed:
            canon, forward, _ = _canonical_closed(points)
        else:
            canon, forward = _canonical_open(points)
        key = (np.int64(pair[0]).tobytes() + np.int64(pair[1]).tobytes()
               + (b"C" if closed else b"O") + canon.tobytes())
        seg = self.segments.get(key)
        if seg is None:
            seg = Segment(pair, canon, closed)
            self.segments[key] = seg
        return seg, forward


@dataclass
class ChartMeshInput:
    chart: Chart
    loops: list[list[tuple[Segment, bool]]]  # per ring: ordered pieces
    ring_signs: list[float]
    studs: list[np.ndarray] = field(default_factory=list)  # interior points


def split_rings_into_segments(chart_id: int, rings: list[Ring],
                              store: SegmentStore) -> ChartMeshInput:
    """Cut rings at tag changes and intern each run in the global store."""
    loops = []
    signs = []
    for ring in rings:
        n = len(ring.corners)
        tags = ring.tags
        change = [i for i in range(n) if tags[i] != tags[i - 1]]
        pieces: list[tuple[Segment, bool]] = []
        if not change:
            seg, forward = store.intern(chart_id, int(tags[0]),
                                        ring.corners, closed=True)
            pieces.append((seg, forward))
        else:
            # Corner i starts a run when the incoming edge tag differs.
            for k, start in enumerate(change):
                end = change[(k + 1) % len(change)]
                idx = [(start + j) % n
                       for j in range(((end - start) % n) + 1)]
                run = ring.corners[idx]
                seg, forward = store.intern(chart_id, int(tags[start]),
                                            run, closed=False)
                pieces.append((seg, forward))
        loops.append(pieces)
        signs.append(1.0 if ring.area() > 0 else -1.0)
    return ChartMeshInput(None, loops, signs)  # chart filled by caller


def douglas_peucker(points: np.ndarray, eps: float) -> np.ndarray:
    """Indices kept by recursive farthest-point simplification."""
    n = len(points)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    pts = points.astype(np.float64)
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        seg = pts[b] - pts[a]
        length = np.hypot(*seg)
        mid = pts[a + 1:b] - pts[a]
        if length < 1e-12:
            dist = np.hypot(mid[:, 0], mid[:, 1])
        else:
            dist = np.abs(mid[:, 0] * seg[1] - mid[:, 1] * seg[0]) / length
        i = int(np.argmax(dist))
        if dist[i] > eps:
            keep[a + 1 + i] = True
            stack.append((a, a + 1 + i))
            stack.append((a + 1 + i, b))
    return np.nonzero(keep)[0]


def simplify_segment(seg: Segment, eps: float) -> None:
    pts = seg.points.astype(np.float64)
    if seg.closed:
        n = len(pts)
        if n <= 3:
            seg.simplified = pts
            return
        d = np.hypot(*(pts - pts[0]).T)
        far = int(np.argmax(d))
        first = douglas_peucker(pts[:far + 1], eps)
        second_pts = np.concatenate([pts[far:], pts[:1]], axis=0)
        second = douglas_peucker(second_pts, eps) + far
        idx = sorted(set(first.tolist()) | {i % n for i in second.tolist()})
        if len(idx) < 3:
            # A ring needs three vertices; keep the point farthest from the
            # anchor chord so tiny charts survive as triangles.
            chord = pts[far] - pts[0]
            ln = max(np.hypot(*chord), 1e-12)
            dev = np.abs((pts[:, 0] - pts[0, 0]) * chord[1]
                         - (pts[:, 1] - pts[0, 1]) * chord[0]) / ln
            dev[idx] = -1.0
            idx = sorted(set(idx) | {int(np.argmax(dev))})
        seg.simplified = pts[idx]
    else:
        seg.simplified = pts[douglas_peucker(pts, eps)]


def apply_insertions(seg: Segment) -> None:
    """Insert stud anchors into the simplified polyline (geometry preserved)."""
    base = seg.simplified
    if not seg.insertions:
        seg.final = base.astype(np.float64)
        return
    by_edge: dict[int, list[tuple[float, tuple[float, float]]]] = {}
    for edge, t, pt in seg.insertions:
        by_edge.setdefault(edge, []).append((t, pt))
    out: list[tuple[float, float]] = []
    n = len(base)
    edge_count = n if seg.closed else n - 1
    for i in range(edge_count):
        nxt = tuple(base[i])
        if not out or out[-1] != nxt:
            out.append(nxt)
        for t, pt in sorted(by_edge.get(i, []), key=lambda e: e[0]):
            if out[-1] != pt:
                out.append(pt)
    if not seg.closed:
        nxt = tuple(base[-1])
        if not out or out[-1] != nxt:
            out.append(nxt)
    # Drop an inserted point that duplicates the segment start (closed).
    if seg.closed and len(out) > 1 and out[0] == out[-1]:
        out.pop()
    seg.final = np.array(out, dtype=np.float64)


def _segment_edges(seg: Segment) -> list[tuple[int, np.ndarray, np.ndarray]]:
    pts = seg.simplified
    n = len(pts)
    count = n if seg.closed else n - 1
    return [(i, pts[i], pts[(i + 1) % n]) for i in range(count)]


def insert_studs(cmi: ChartMeshInput, spacing: float = 16.0) -> None:
    """Vertical stud polylines across the chart interior.

    Columns sit every ``spacing`` from the left of the chart bbox (corner
    space).  Each column's interior spans, by even-odd crossing of the
    simplified boundary, become studs whose endpoints are inserted into
    the crossed segments (both adjacent charts see them) and whose interior
    vertices are spaced evenly along the span.
    """
    chart = cmi.chart
    x_left = chart.x0  # corner-space bbox: [x0, x1 + 1]
    x_right = chart.x1 + 1
    studs = []
    segs = {id(s): s for loop in cmi.loops for s, _ in loop}
    edges = []
    for s in segs.values():
        edges.extend((s, i, a, b) for i, a, b in _segment_edges(s))

    col = x_left + spacing
    while col < x_right:
        crossings = []
        for s, i, a, b in edges:
            x0, x1 = a[0], b[0]
            if x0 == x1:
                continue
            lo, hi = (x0, x1) if x0 < x1 else (x1, x0)
            if not (lo <= col < hi):
                continue
            t = (col - x0) / (x1 - x0)
            y = a[1] + t * (b[1] - a[1])
            crossings.append((y, s, i, t))
        if len(crossings) >= 2 and len(crossings) % 2 == 0:
            crossings.sort(key=lambda c: c[0])
            for k in range(0, len(crossings), 2):
                y0, s0, i0, t0 = crossings[k]
                y1, s1, i1, t1 = crossings[k + 1]
                length = y1 - y0
                if length <= 0:
                    continue
                # Skip the insertion when the crossing hits an existing
                # vertex; it can still anchor the stud.
                if 1e-12 < t0 < 1 - 1e-12:
                    s0.insertions.append((i0, t0, (float(col), float(y0))))
                if 1e-12 < t1 < 1 - 1e-12:
                    s1.insertions.append((i1, t1, (float(col), float(y1))))
                n_inner = max(0, int(round(length / spacing)) - 1)
                if n_inner:
                    ys = y0 + (np.arange(1, n_inner + 1) / (n_inner + 1)) * length
                    studs.append(np.stack([np.full(n_inner, float(col)), ys],
                                          axis=1))
        col += spacing
    cmi.studs = studs


def _provisional_rings(cmi: ChartMeshInput) -> list[np.ndarray]:
    """Rings from the current simplified polylines (pre-stud)."""
    rings = []
    for pieces, sign in zip(cmi.loops, cmi.ring_signs):
        pts: list[tuple[float, float]] = []
        for seg, forward in pieces:
            run = seg.simplified if forward else seg.simplified[::-1]
            if seg.closed and len(pieces) == 1:
                rings.append(run.copy())
                break
            start = 1 if pts and tuple(run[0]) == pts[-1] else 0
            pts.extend(map(tuple, run[start:]))
        else:
            if pts and pts[0] == pts[-1]:
                pts.pop()
            rings.append(np.array(pts, dtype=np.float64))
    return [r for r in rings if len(r) >= 3]


def _point_in_ring(p, ring: np.ndarray) -> bool:
    x, y = p
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            if x < x1 + t * (x2 - x1):
                inside = not inside
    return inside


def _repair_self_intersections(inputs: list[ChartMeshInput],
                               store: SegmentStore, eps: float,
                               max_rounds: int = 8) -> None:
    """Re-simplify segments of self-crossing outlines at halved tolerance.

    Thin charts can fold their simplified outline over itself; re-running
    the simplification on the offending segments (shared objects, so both
    charts update together) with a smaller epsilon restores simplicity.
    At epsilon below half a pixel the detailed grid outline returns, which
    is simple by construction.
    """
    from .triangulate import find_self_intersection

    seg_eps: dict[int, float] = {}
    for round_no in range(max_rounds):
        cur = eps / (2 ** round_no)
        bad_segments: set[int] = set()
        for cmi in inputs:
            rings = _provisional_rings(cmi)
            if not rings:
                continue
            rings = sorted(rings, key=lambda r: -abs(ring_area(r)))
            broken = find_self_intersection(rings) is not None
            if not broken and len(rings) > 1:
                outer = rings[0]
                for hole in rings[1:]:
                    if not _point_in_ring(hole[0], outer):
                        broken = True
                        break
            if broken:
                for pieces in cmi.loops:
                    for seg, _ in pieces:
                        bad_segments.add(id(seg))
        if not bad_segments:
            return
        next_eps = cur / 2
        for cmi in inputs:
            for pieces in cmi.loops:
                for seg, _ in pieces:
                    if id(seg) in bad_segments and seg_eps.get(id(seg), eps) > next_eps:
                        seg_eps[id(seg)] = next_eps
                        simplify_segment(seg, next_eps)


def assemble_rings(cmi: ChartMeshInput) -> list[np.ndarray]:
    """Final polygon rings from the shared segments' anchored polylines."""
    rings = []
    for pieces, sign in zip(cmi.loops, cmi.ring_signs):
        pts: list[tuple[float, float]] = []
        for seg, forward in pieces:
            run = seg.final if forward else seg.final[::-1]
            if seg.closed and len(pieces) == 1:
                ring = run.copy()
                break
            start = 0
            if pts and tuple(run[0]) == pts[-1]:
                start = 1
            pts.extend(map(tuple, run[start:]))
        else:
            if pts and pts[0] == pts[-1]:
                pts.pop()
            deduped = [p for i, p in enumerate(pts) if p != pts[i - 1]]
            ring = np.array(deduped if deduped else pts, dtype=np.float64)
        if len(ring) < 3 or abs(ring_area(ring)) <= 1e-12:
            continue  # sub-epsilon sliver: simplification erased it
        area = ring_area(ring)
        if area * sign < 0:
            ring = ring[::-1].copy()
        rings.append(ring)
    # Outer ring (positive, largest |area|) first.
    rings.sort(key=lambda r: -ring_area(r))
    return rings


@dataclass
class TexturedMesh:
    positions: np.ndarray  # (N, 3) float32, scene units, y-up z-back
    uvs: np.ndarray        # (N, 2) float32 in [0, 1]
    triangles: np.ndarray  # (M, 3) uint32

    def validate(self) -> list[str]:
        issues = []
        n = len(self.positions)
        if self.triangles.size and self.triangles.max() >= n:
            issues.append("triangle index out of range")
        if ((self.uvs < -1e-6) | (self.uvs > 1 + 1e-6)).any():
            issues.append("UV outside [0, 1]")
        a = self.positions[self.triangles[:, 0]]
        b = self.positions[self.triangles[:, 1]]
        c = self.positions[self.triangles[:, 2]]
        areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        if (areas < 1e-12).any():
            issues.append(f"{int((areas < 1e-12).sum())} degenerate triangles")
        return issues


class DepthSampler:
    """Consistent per-corner depth: one value per connected surface cluster.

    Charts sharing a segment through a corner form a cluster there; all of
    them sample the nearest member pixel from the cluster's union, so their
    lifted vertices coincide exactly.
    """

    def __init__(self, ldi: Ldi, chart_set: ChartSet):
        self.ldi = ldi
        self.grids = {}
        for chart in chart_set.charts:
            self.grids[chart.id] = (chart.local_grid(ldi), chart.x0, chart.y0)
        self.corner_groups: dict[tuple[int, int], list[set[int]]] = {}

    def register_segment(self, seg: Segment) -> None:
        charts = {c for c in seg.charts if c >= 0}
        pts = seg.final
        for p in pts:
            key = (int(round(p[0] * 2)), int(round(p[1] * 2)))
            groups = self.corner_groups.setdefault(key, [])
            merged = None
            for g in groups:
                if g & charts:
                    if merged is None:
                        g |= charts
                        merged = g
                    else:
                        merged |= g
                        groups.remove(g)
            if merged is None:
                groups.append(set(charts))

    def disparity_at(self, cid: int, vx: float, vy: float) -> float:
        # Vertex coords are corner space; lattice cells sit at corner - 0.5.
        key = (int(round(vx * 2)), int(round(vy * 2)))
        cluster = {cid}
        for g in self.corner_groups.get(key, []):
            if cid in g:
                cluster = g
                break
        lx, ly = vx - 0.5, vy - 0.5  # lattice coordinates of the vertex
        best = None
        for radius in (1.3, 2.5, 6.0):
            for cc in sorted(cluster):
                grid, x0, y0 = self.grids[cc]
                gh, gw = grid.shape
                cx0 = int(np.ceil(lx - radius)) - x0
                cx1 = int(np.floor(lx + radius)) - x0
                cy0 = int(np.ceil(ly - radius)) - y0
                cy1 = int(np.floor(ly + radius)) - y0
                for cy in range(max(cy0, 0), min(cy1, gh - 1) + 1):
                    for cx in range(max(cx0, 0), min(cx1, gw - 1) + 1):
                        p = grid[cy, cx]
                        if p < 0:
                            continue
                        d2 = (cx + x0 - lx) ** 2 + (cy + y0 - ly) ** 2
                        cand = (d2, cy + y0, cx + x0, int(p))
                        if best is None or cand < best:
                            best = cand
            if best is not None:
                break
        if best is None:
            raise GeometryError(f"no depth sample near vertex ({vx}, {vy}) "
                                f"for chart {cid}")
        return float(self.ldi.disparity[best[3]])


def build_mesh(ldi: Ldi, chart_set: ChartSet, layout: AtlasLayout,
               camera: Camera, simplify_eps: float = 1.5,
               stud_spacing: float = 16.0) -> TexturedMesh:
    """Full meshing stage: outline, simplify, studs, triangulate, lift."""
    store = SegmentStore()
    inputs: list[ChartMeshInput] = []
    for chart in chart_set.charts:
        rings = extract_outline(chart, ldi, chart_set.chart_of)
        cmi = split_rings_into_segments(chart.id, rings, store)
        cmi.chart = chart
        inputs.append(cmi)

    for seg in store.segments.values():
        simplify_segment(seg, simplify_eps)
    _repair_self_intersections(inputs, store, simplify_eps)
    for cmi in inputs:
        insert_studs(cmi, stud_spacing)
    for seg in store.segments.values():
        apply_insertions(seg)

    sampler = DepthSampler(ldi, chart_set)
    for seg in store.segments.values():
        sampler.register_segment(seg)

    all_pos: list[np.ndarray] = []
    all_uv: list[np.ndarray] = []
    all_tri: list[np.ndarray] = []
    offset = 0
    aw, ah = float(layout.width), float(layout.height)
    pad = layout.pad

    for cmi in inputs:
        chart = cmi.chart
        rings = assemble_rings(cmi)
        if not rings or ring_area(rings[0]) <= 0:
            continue  # chart vanished below the simplification tolerance
        interior = (np.concatenate(cmi.studs, axis=0)
                    if cmi.studs else np.empty((0, 2)))
        # The repair pass already guaranteed simple rings; stud anchors
        # lie on the polylines and cannot introduce crossings.
        pts2d, tris = triangulate_with_points(rings, interior, validate=False)
        if len(tris) == 0:
            continue
        n_boundary = sum(len(r) for r in rings)
        disp = np.empty(len(pts2d), dtype=np.float64)
        for i, (vx, vy) in enumerate(pts2d):
            if i < n_boundary:
                disp[i] = sampler.disparity_at(chart.id, vx, vy)
            else:
                disp[i] = self_disp(sampler, chart.id, vx, vy)
        lattice = pts2d - 0.5  # corner space -> lattice coordinates
        pts3 = camera.unproject(lattice[:, 0], lattice[:, 1], disp)
        pos = np.stack([pts3[:, 0], -pts3[:, 1], -pts3[:, 2]], axis=1)

        ox, oy = layout.placements[chart.id]
        u = (ox + pad + (pts2d[:, 0] - chart.x0)) / aw
        v = (oy + pad + (pts2d[:, 1] - chart.y0)) / ah
        all_pos.append(pos.astype(np.float32))
        all_uv.append(np.stack([u, v], axis=1).astype(np.float32))
        all_tri.append(tris.astype(np.uint32) + np.uint32(offset))
        offset += len(pts2d)

    if not all_pos:
        raise GeometryError("mesh is empty")
    return TexturedMesh(np.concatenate(all_pos),
                        np.concatenate(all_uv),
                        np.concatenate(all_tri))


def self_disp(sampler: DepthSampler, cid: int, vx: float, vy: float) -> float:
    """Depth for interior vertices: nearest member pixel of the own chart."""
    grid, x0, y0 = sampler.grids[cid]
    lx, ly = vx - 0.5, vy - 0.5
    gh, gw = grid.shape
    best = None
    for radius in (1.3, 2.5, 6.0, 1e9):
        cx0 = max(int(np.ceil(lx - radius)) - x0, 0)
        cx1 = min(int(np.floor(lx + radius)) - x0, gw - 1)
        cy0 = max(int(np.ceil(ly - radius)) - y0, 0)
        cy1 = min(int(np.floor(ly + radius)) - y0, gh - 1)
        for cy in range(cy0, cy1 + 1):
            for cx in range(cx0, cx1 + 1):
                p = grid[cy, cx]
                if p < 0:
                    continue
                d2 = (cx + x0 - lx) ** 2 + (cy + y0 - ly) ** 2
                cand = (d2, cy + y0, cx + x0, int(p))
                if best is None or cand < best:
                    best = cand
        if best is not None:
            break
    return float(sampler.ldi.disparity[best[3]])
