"""Deterministic triangulations: structured squares, graded disk and periodic cells, perforated lattices.

Circular meshes are built from closed rings of vertices. Consecutive rings
are stitched by a zipper that walks both rings in angle order, so any two
ring sizes can be joined. Angles are kept as integer fractions j/n, which
makes the stitching decisions exact and the meshes invariant under quarter
turns whenever every ring size is a multiple of four.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np

from .closed_form import AnnulusSpec
from .errors import ArgumentError, GradingError, MeshError, PairingError, ResolutionError


class Subdomain(IntEnum):
    DISK_CORE = 0
    ANNULUS = 1
    EXTERIOR = 2


class Boundary(IntEnum):
    OUTER = 0
    INNER_CIRCLE = 1
    SIDE_LEFT = 2
    SIDE_RIGHT = 3
    SIDE_BOTTOM = 4
    SIDE_TOP = 5


# polygon with n sides loses 1 - sin(2 pi/n) n/(2 pi) of the disk area; 88 keeps it under 1e-3
MIN_CIRCLE_SEGMENTS = 88


@dataclass(frozen=True)
class GradingSpec:
    """Radial grading of a cell mesh.

    ``layers`` bounds the number of geometric rings between the two circles
    and ``ratio`` bounds their growth factor; the rings actually used are the
    fewest that respect ``ratio``. ``target_h`` sets the angular resolution
    and the element size outside the annulus. ``segments`` overrides the
    number of vertices on each circle.
    """

    layers: int = 64
    ratio: float = 1.3
    target_h: float = 0.03
    segments: int | None = None

    def __post_init__(self):
        if self.layers < 1:
            raise GradingError("layers must be >= 1")
        if not self.ratio > 1.0:
            raise GradingError("ratio must exceed 1")
        if not self.target_h > 0:
            raise GradingError("target_h must be positive")
        if self.segments is not None and (self.segments < 8 or self.segments % 8):
            raise GradingError("segments must be a positive multiple of 8")

    def refined(self) -> "GradingSpec":
        """Halve every length scale: half target_h, square-root ratio, twice the layers."""
        seg = None if self.segments is None else 2 * self.segments
        return GradingSpec(2 * self.layers, math.sqrt(self.ratio), 0.5 * self.target_h, seg)

    def circle_segments(self, radius: float) -> int:
        if self.segments is not None:
            return max(self.segments, MIN_CIRCLE_SEGMENTS)
        n = 8 * math.ceil(2 * math.pi * radius / (8 * self.target_h))
        return max(n, MIN_CIRCLE_SEGMENTS)

    def ring_radii(self, r_in: float, r_out: float) -> np.ndarray:
        span = math.log(r_out / r_in)
        if self.layers * math.log(self.ratio) < span * (1 - 1e-12):
            raise GradingError(
                f"{self.layers} layers of ratio {self.ratio} cannot span ({r_in:.4g}, {r_out:.4g})"
            )
        k = max(1, math.ceil(span / math.log(self.ratio) - 1e-9))
        radii = r_in * np.exp(span * np.arange(k + 1) / k)
        radii[0], radii[-1] = r_in, r_out
        return radii


@dataclass(frozen=True, eq=False)
class LatticeInfo:
    """How a perforated mesh was tiled from a periodic template."""

    template: "Mesh"
    centers: np.ndarray  # (ncells, 2)
    scale: float  # physical length of one template unit
    half_width: float
    cell_of_triangle: np.ndarray
    template_triangle: np.ndarray

    @property
    def pitch(self) -> float:
        return 2 * self.half_width * self.scale


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    subdomain: np.ndarray
    tagged_edges: np.ndarray
    edge_tags: np.ndarray
    periodic_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    period: tuple | None = None  # (lower, upper) box for periodic meshes
    circles: tuple = ()  # (cx, cy, radius) of every tagged circle
    lattice: LatticeInfo | None = None
    structured: tuple | None = None  # (n, lower, upper) for structured_square

    def __post_init__(self):
        for name in ("vertices", "triangles", "subdomain", "tagged_edges", "edge_tags", "periodic_pairs"):
            getattr(self, name).setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def _edge_data(self):
        t = self.triangles
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        local = np.sort(local, axis=1)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges (sorted vertex pairs)."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Edge index opposite each local vertex, shape (nt, 3)."""
        return self._edge_data[1]

    @cached_property
    def edge_triangle_count(self) -> np.ndarray:
        return np.bincount(self.triangle_edges.ravel(), minlength=len(self.edges))

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return self.edges[self.edge_triangle_count == 1]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @property
    def h_min(self) -> float:
        return float(self.edge_lengths.min())

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths.max())

    def area_of(self, tag: Subdomain) -> float:
        return float(self.areas[self.subdomain == tag].sum())

    def vertices_with_tag(self, tag: Boundary) -> np.ndarray:
        sel = self.tagged_edges[self.edge_tags == tag]
        return np.unique(sel)

    @cached_property
    def triangle_local_centers(self):
        """Per triangle: (cell centre, scale) to map physical points to template coordinates."""
        if self.lattice is None:
            return np.zeros((self.n_triangles, 2)), 1.0
        lat = self.lattice
        return lat.centers[lat.cell_of_triangle], lat.scale

    def to_local(self, points: np.ndarray, triangle_index: np.ndarray) -> np.ndarray:
        """Template coordinates of physical ``points`` lying in the given triangles."""
        if self.lattice is None:
            return points
        centers, scale = self.triangle_local_centers
        return (points - centers[triangle_index]) / scale


# ---------------------------------------------------------------- validation


def check_mesh(mesh: Mesh, tol: float = 1e-12) -> None:
    """Raise MeshError unless the mesh passes the validity suite."""
    if mesh.triangles.min() < 0 or mesh.triangles.max() >= mesh.n_vertices:
        raise MeshError("triangle index out of range")
    a = mesh.signed_areas
    scale = max(mesh.h_max**2, 1e-300)
    if np.any(a <= 1e-14 * scale):
        raise MeshError(f"{int(np.sum(a <= 0))} triangles with non-positive area")
    counts = mesh.edge_triangle_count
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise MeshError("unreferenced vertices")
    if len(mesh.periodic_pairs):
        lo, hi = (np.asarray(x) for x in mesh.period)
        L = hi - lo
        d = mesh.vertices[mesh.periodic_pairs[:, 0]] - mesh.vertices[mesh.periodic_pairs[:, 1]]
        ok = [(1, 0), (0, 1), (1, 1)]
        good = np.zeros(len(d), dtype=bool)
        for i, j in ok:
            good |= np.all(np.abs(d - L * np.array([i, j])) <= tol * max(L), axis=1)
        if not good.all():
            raise MeshError("periodic pair not related by a period vector")
        if np.intersect1d(mesh.periodic_pairs[:, 0], mesh.periodic_pairs[:, 1]).size:
            raise MeshError("periodic pairing chains slaves to slaves")
    for cx, cy, r in mesh.circles:
        dist = np.hypot(mesh.vertices[:, 0] - cx, mesh.vertices[:, 1] - cy)
        on = np.abs(dist - r) <= tol * max(r, 1.0) * 10
        d = dist[mesh.triangles]
        inside = np.all((d <= r) | on[mesh.triangles], axis=1)
        outside = np.all((d >= r) | on[mesh.triangles], axis=1)
        if not np.all(inside | outside):
            raise MeshError(f"triangle straddles circle r={r}")


# ---------------------------------------------------------------- structured


def _box(lower, upper):
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.shape != (2,) or hi.shape != (2,) or not np.all(hi > lo):
        raise ArgumentError(f"degenerate box {lower} - {upper}")
    return lo, hi


def structured_square(n: int, lower=(0.0, 0.0), upper=(1.0, 1.0), periodic: bool = False) -> Mesh:
    """Uniform grid of 2 n^2 right triangles, every square cut along the same diagonal."""
    if n < 2:
        raise ArgumentError("n must be at least 2")
    lo, hi = _box(lower, upper)
    xs = np.linspace(lo[0], hi[0], n + 1)
    ys = np.linspace(lo[1], hi[1], n + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[j, i]
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])
    edges, tags = [], []
    for side, tag in (
        (idx[:, 0], Boundary.SIDE_LEFT),
        (idx[:, -1], Boundary.SIDE_RIGHT),
        (idx[0, :], Boundary.SIDE_BOTTOM),
        (idx[-1, :], Boundary.SIDE_TOP),
    ):
        edges.append(np.column_stack([side[:-1], side[1:]]))
        tags.append(np.full(n, tag))
    pairs = np.zeros((0, 2), dtype=np.int64)
    period = None
    if periodic:
        right = np.column_stack([idx[:-1, -1], idx[:-1, 0]])[1:]
        top = np.column_stack([idx[-1, 1:-1], idx[0, 1:-1]])
        corners = np.array([[idx[0, -1], idx[0, 0]], [idx[-1, 0], idx[0, 0]], [idx[-1, -1], idx[0, 0]]])
        pairs = np.vstack([right, top, corners]).astype(np.int64)
        period = (tuple(lo), tuple(hi))
    return Mesh(
        verts,
        tris,
        np.full(len(tris), Subdomain.EXTERIOR, dtype=np.int8),
        np.vstack(edges).astype(np.int64),
        np.concatenate(tags).astype(np.int8),
        pairs,
        period,
        structured=(n, tuple(lo), tuple(hi)),
    )


# ---------------------------------------------------------------- ring builder


class _RingBuilder:
    """Accumulates rings of vertices and the triangles stitching them."""

    def __init__(self):
        self.points: list[np.ndarray] = []
        self.count = 0
        self.tris: list[np.ndarray] = []
        self.tags: list[np.ndarray] = []

    def add_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ids = np.arange(self.count, self.count + len(pts))
        self.points.append(pts)
        self.count += len(pts)
        return ids

    def fan(self, center: int, ring: np.ndarray, tag):
        n = len(ring)
        t = np.column_stack([np.full(n, center), ring, np.roll(ring, -1)])
        self.tris.append(t)
        self.tags.append(np.full(n, tag, dtype=np.int8))

    def zip(self, inner: np.ndarray, outer: np.ndarray, tag):
        """Stitch two closed rings whose k-th vertices sit at angle 2 pi k / len(ring)."""
        na, nb = len(inner), len(outer)
        out = []
        i = j = 0
        while i < na or j < nb:
            # next angles (i+1)/na and (j+1)/nb compared exactly
            advance_inner = j >= nb or (i < na and (i + 1) * nb <= (j + 1) * na)
            if advance_inner:
                out.append((inner[i % na], outer[j % nb], inner[(i + 1) % na]))
                i += 1
            else:
                out.append((inner[i % na], outer[j % nb], outer[(j + 1) % nb]))
                j += 1
        self.tris.append(np.array(out, dtype=np.int64))
        self.tags.append(np.full(len(out), tag, dtype=np.int8))

    def finish(self):
        pts = np.vstack(self.points)
        tris = np.vstack(self.tris)
        tags = np.concatenate(self.tags)
        return pts, tris, tags


def _circle(radius, n):
    th = 2 * np.pi * np.arange(n) / n
    pts = radius * np.column_stack([np.cos(th), np.sin(th)])
    # exact values at the quarter points keep quarter-turn symmetry clean
    q = n // 4
    if n % 4 == 0:
        pts[0] = (radius, 0.0)
        pts[q] = (0.0, radius)
        pts[2 * q] = (-radius, 0.0)
        pts[3 * q] = (0.0, -radius)
    return pts


def _square(h, n):
    """Points where the rays at angles 2 pi k/n meet the square of half-width h (n divisible by 8)."""
    tan = np.tan(2 * np.pi * np.arange(n // 8 + 1) / n)
    tan[-1] = 1.0
    pts = np.empty((n, 2))
    for k in range(n):
        m = (k + n // 8) % n  # shift so each side occupies a contiguous range of n/4
        side, off = divmod(m, n // 4)
        s = off - n // 8  # in [-n/8, n/8)
        t = math.copysign(tan[abs(s)], s) if s else 0.0
        if side == 0:
            pts[k] = (h, h * t)
        elif side == 1:
            pts[k] = (-h * t, h)
        elif side == 2:
            pts[k] = (-h, -h * t)
        else:
            pts[k] = (h * t, -h)
    return pts


def _core_rings(builder, r_in, n_circle, tag):
    """Rings filling the disk r < r_in; returns the id array of the outer circle ring."""
    m = max(1, math.ceil(n_circle / (4 * math.pi)))
    center = builder.add_points([(0.0, 0.0)])[0]
    prev = None
    for j in range(1, m + 1):
        if j == m:
            n_j = n_circle
        else:
            n_j = max(8, 4 * round(n_circle * j / (4 * m)))
        ring = builder.add_points(_circle(r_in * j / m, n_j))
        if prev is None:
            builder.fan(center, ring, tag)
        else:
            builder.zip(prev, ring, tag)
        prev = ring
    return prev


def _annulus_rings(builder, first, radii, n, tag):
    prev = first
    for r in radii[1:]:
        ring = builder.add_points(_circle(r, n))
        builder.zip(prev, ring, tag)
        prev = ring
    return prev


def _dedupe(pts, tris, tags):
    """Merge coincident vertices and drop triangles that collapse."""
    key = np.round(pts, 14)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    if len(first) == len(pts):
        return pts, tris, tags
    # keep original ordering of first appearances
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    new_index = rank[inverse]
    pts = pts[np.sort(first)]
    tris = new_index[tris]
    keep = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    return pts, tris[keep], tags[keep]


def _ring_edges(ring):
    return np.column_stack([ring, np.roll(ring, -1)])


def _orient(pts, tris):
    p = pts[tris]
    a = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = a < 0
    tris = tris.copy()
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


# ---------------------------------------------------------------- cells


def disk_cell(R: float, grading: GradingSpec = GradingSpec(), inner_circle: float | None = None) -> Mesh:
    """Disk of radius R, optionally conforming to a graded inner circle."""
    if R <= 0:
        raise ArgumentError("R must be positive")
    n = grading.circle_segments(R)
    b = _RingBuilder()
    if inner_circle is None:
        outer = _core_rings(b, R, n, Subdomain.DISK_CORE)
        circles = ((0.0, 0.0, R),)
        inner_edges = np.zeros((0, 2), dtype=np.int64)
    else:
        if not 0 < inner_circle < R:
            raise ArgumentError("need 0 < inner_circle < R")
        radii = grading.ring_radii(inner_circle, R)
        ring0 = _core_rings(b, inner_circle, n, Subdomain.DISK_CORE)
        outer = _annulus_rings(b, ring0, radii, n, Subdomain.ANNULUS)
        circles = ((0.0, 0.0, inner_circle), (0.0, 0.0, R))
        inner_edges = _ring_edges(ring0)
    pts, tris, tags = b.finish()
    tris = _orient(pts, tris)
    edges = np.vstack([_ring_edges(outer), inner_edges]).astype(np.int64)
    etags = np.concatenate([np.full(len(outer), Boundary.OUTER), np.full(len(inner_edges), Boundary.INNER_CIRCLE)])
    return Mesh(pts, tris, tags, edges, etags.astype(np.int8), circles=circles)


def periodic_cell(annulus: AnnulusSpec, half_width: float, grading: GradingSpec = GradingSpec()) -> Mesh:
    """Square cell of half-width ``half_width`` resolving the circles r_eps and R, fully periodic.

    Outside R the rings morph linearly from the circle to the square. R may
    equal half_width, in which case the circle touches the sides and the
    coincident vertices are merged.
    """
    R, r0, h = annulus.R, annulus.r_eps, half_width
    if R > h * (1 + 1e-14):
        raise ArgumentError("R must not exceed half_width")
    n = grading.circle_segments(R)
    b = _RingBuilder()
    ring0 = _core_rings(b, r0, n, Subdomain.DISK_CORE)
    ringR = _annulus_rings(b, ring0, grading.ring_radii(r0, R), n, Subdomain.ANNULUS)
    circle = _circle(R, n)
    square = _square(h, n)
    gap = 0.5 * (1 + math.sqrt(2)) * h - R
    layers = max(2, math.ceil(gap / grading.target_h))
    prev = ringR
    for k in range(1, layers + 1):
        t = k / layers
        pts = square if k == layers else (1 - t) * circle + t * square
        ring = b.add_points(pts)
        b.zip(prev, ring, Subdomain.EXTERIOR)
        prev = ring
    square_ids = prev
    pts, tris, tags = b.finish()
    # ids of the inner circle ring survive deduplication unchanged (they come first)
    inner_edges = _ring_edges(ring0)
    pts, tris, tags = _dedupe(pts, tris, tags)
    tris = _orient(pts, tris)

    lookup = {tuple(p): i for i, p in enumerate(pts)}
    sq = np.array([lookup[tuple(p)] for p in square])
    side_edges = _ring_edges(sq)
    mid = 0.5 * (pts[side_edges[:, 0]] + pts[side_edges[:, 1]])
    etag = np.select(
        [mid[:, 0] >= h, mid[:, 1] >= h, mid[:, 0] <= -h],
        [Boundary.SIDE_RIGHT, Boundary.SIDE_TOP, Boundary.SIDE_LEFT],
        Boundary.SIDE_BOTTOM,
    )
    pairs = _side_pairs(pts, sq, h, lookup)
    edges = np.vstack([inner_edges, side_edges]).astype(np.int64)
    etags = np.concatenate([np.full(len(inner_edges), Boundary.INNER_CIRCLE), etag]).astype(np.int8)
    circles = ((0.0, 0.0, r0), (0.0, 0.0, R))
    return Mesh(pts, tris, tags, edges, etags, pairs, ((-h, -h), (h, h)), circles)


def _side_pairs(pts, square_ids, h, lookup):
    pairs = []
    for v in np.unique(square_ids):
        x, y = pts[v]
        if x == h or y == h:
            mx = -h if x == h else x
            my = -h if y == h else y
            m = lookup.get((mx, my))
            if m is None:
                raise PairingError(f"no partner for boundary vertex ({x}, {y})")
            pairs.append((v, m))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def perforated_lattice(
    domain=((0.0, 0.0), (1.0, 1.0)),
    pitch: float = 0.25,
    annulus: AnnulusSpec | None = None,
    grading: GradingSpec = GradingSpec(),
    half_width: float = 0.5,
    template: Mesh | None = None,
) -> Mesh:
    """Tile the domain with whole copies of a periodic cell.

    ``annulus`` and ``half_width`` are in template units; the template is
    scaled so that its side equals ``pitch``. Cells are centred at
    lower + pitch (i + 1/2, j + 1/2).
    """
    lo, hi = _box(*domain)
    if pitch <= 0:
        raise ArgumentError("pitch must be positive")
    counts = (hi - lo) / pitch
    nx, ny = (int(round(c)) for c in counts)
    if min(nx, ny) < 1 or np.any(np.abs(counts - (nx, ny)) > 1e-12 * np.maximum(counts, 1)):
        raise ArgumentError(f"pitch {pitch} does not divide the domain sides {hi - lo}")
    scale = pitch / (2 * half_width)
    if template is None:
        if annulus is None:
            raise ArgumentError("need an annulus or a template")
        if annulus.r_eps / (2 * half_width) < 1e-7:
            raise ResolutionError(f"inner radius {annulus.r_eps * scale:.3e} below 1e-7 pitch")
        template = periodic_cell(annulus, half_width, grading)
    h = half_width
    tv = template.vertices
    lookup = {tuple(p): i for i, p in enumerate(tv)}
    on_side = np.flatnonzero((np.abs(tv[:, 0]) == h) | (np.abs(tv[:, 1]) == h))
    # for each boundary template vertex: (di, dj, template vertex in that earlier neighbour)
    aliases: dict[int, list] = {}
    for v in on_side:
        x, y = tv[v]
        for di, dj in ((-1, 0), (0, -1), (-1, -1), (1, -1)):
            other = lookup.get((x - 2 * h * di, y - 2 * h * dj))
            if other is not None:
                aliases.setdefault(int(v), []).append((di, dj, other))

    nvt = len(tv)
    gid = np.full((ny, nx, nvt), -1, dtype=np.int64)
    coords = []
    count = 0
    centers = np.array([[lo[0] + pitch * (i + 0.5), lo[1] + pitch * (j + 0.5)] for j in range(ny) for i in range(nx)])
    for j in range(ny):
        for i in range(nx):
            ids = gid[j, i]
            for v, al in aliases.items():
                for di, dj, other in al:
                    ii, jj = i + di, j + dj
                    if 0 <= ii < nx and 0 <= jj < ny:
                        ids[v] = gid[jj, ii, other]
                        break
            new = np.flatnonzero(ids < 0)
            ids[new] = count + np.arange(len(new))
            count += len(new)
            coords.append(centers[j * nx + i] + scale * tv[new])
    verts = np.vstack(coords)
    ncell = nx * ny
    ntt = template.n_triangles
    tris = np.vstack([gid[c // nx, c % nx][template.triangles] for c in range(ncell)])
    tags = np.tile(template.subdomain, ncell)
    inner = template.tagged_edges[template.edge_tags == Boundary.INNER_CIRCLE]
    inner_edges = np.vstack([gid[c // nx, c % nx][inner] for c in range(ncell)])

    mesh0 = Mesh(verts, tris, tags, np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int8))
    bnd = mesh0.boundary_edges
    mid = 0.5 * (verts[bnd[:, 0]] + verts[bnd[:, 1]])
    tol = 1e-9 * pitch
    btag = np.select(
        [np.abs(mid[:, 0] - lo[0]) < tol, np.abs(mid[:, 0] - hi[0]) < tol, np.abs(mid[:, 1] - lo[1]) < tol],
        [Boundary.SIDE_LEFT, Boundary.SIDE_RIGHT, Boundary.SIDE_BOTTOM],
        Boundary.SIDE_TOP,
    )
    circles = tuple(
        (float(c[0]), float(c[1]), float(cr[2] * scale)) for c in centers for cr in template.circles
    )
    lattice = LatticeInfo(
        template,
        centers,
        scale,
        half_width,
        np.repeat(np.arange(ncell), ntt),
        np.tile(np.arange(ntt), ncell),
    )
    return Mesh(
        verts,
        tris,
        tags,
        np.vstack([bnd, inner_edges]).astype(np.int64),
        np.concatenate([btag, np.full(len(inner_edges), Boundary.INNER_CIRCLE)]).astype(np.int8),
        circles=circles,
        lattice=lattice,
    )


def submesh(mesh: Mesh, keep: np.ndarray) -> tuple[Mesh, np.ndarray, np.ndarray]:
    """Restrict to the triangles selected by the boolean mask ``keep``.

    Returns (submesh, vertex map new->old, triangle map new->old).
    """
    tri_ids = np.flatnonzero(keep)
    tris = mesh.triangles[tri_ids]
    used = np.unique(tris)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    m = Mesh(
        mesh.vertices[used],
        remap[tris],
        mesh.subdomain[tri_ids],
        np.zeros((0, 2), dtype=np.int64),
        np.zeros(0, dtype=np.int8),
        circles=mesh.circles,
    )
    return m, used, tri_ids


# ---------------------------------------------------------------- output


def dump_text(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}\n")
        for x, y in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r}\n")
        for (i, j, k), tag in zip(mesh.triangles, mesh.subdomain):
            fh.write(f"{i} {j} {k} {int(tag)}\n")


def load_text(path) -> Mesh:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    nv, nt = int(head[1]), int(head[3])
    verts = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + nv]]).reshape(-1, 2)
    tri = np.array([[int(v) for v in ln.split()] for ln in lines[1 + nv : 1 + nv + nt]]).reshape(-1, 4)
    return Mesh(
        verts, tri[:, :3].copy(), tri[:, 3].astype(np.int8), np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int8)
    )


def write_vtk(mesh: Mesh, path, point_data: dict | None = None, cell_data: dict | None = None, title="mesh") -> None:
    """Legacy ASCII VTK unstructured grid. Vector data are (n, 2) arrays."""
    nv, nt = mesh.n_vertices, mesh.n_triangles
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    out += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    out.append(f"CELL_TYPES {nt}")
    out += ["5"] * nt
    cell_data = {"subdomain": mesh.subdomain.astype(int), **(cell_data or {})}
    out.append(f"CELL_DATA {nt}")
    out += _vtk_arrays(cell_data)
    if point_data:
        out.append(f"POINT_DATA {nv}")
        out += _vtk_arrays(point_data)
    Path(path).write_text("\n".join(out) + "\n")


def _vtk_arrays(data):
    lines = []
    for name, arr in data.items():
        arr = np.asarray(arr)
        if arr.ndim == 2:
            lines.append(f"VECTORS {name} double")
            lines += [f"{a!r} {b!r} 0.0" for a, b in arr.astype(float).tolist()]
        else:
            kind = "int" if np.issubdtype(arr.dtype, np.integer) else "double"
            lines.append(f"SCALARS {name} {kind} 1")
            lines.append("LOOKUP_TABLE default")
            lines += [repr(v) for v in arr.tolist()]
    return lines
