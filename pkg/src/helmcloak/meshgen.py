"""Structured triangulations of disks, annuli and ellipses.

All meshes are built from concentric node rings with counts proportional
to radius, triangulated band by band with an angular merge.  The
construction is deterministic (no randomness anywhere), the outer
boundary ring is ordered counterclockwise, and an optional interface
circle is represented exactly by one of the rings.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError

MESH_FORMAT_VERSION = 1

# Boundary-curve descriptors: ("circle", R) or ("ellipse", a, b).  Kept as
# plain tuples so meshes stay picklable; not part of the file format.
Curve = tuple


def _project_to_curve(points: np.ndarray, curve: Curve) -> np.ndarray:
    if curve[0] == "circle":
        r = np.hypot(points[:, 0], points[:, 1])
        return curve[1] * points / r[:, None]
    if curve[0] == "ellipse":
        a, b = curve[1], curve[2]
        rho = np.sqrt((points[:, 0] / a) ** 2 + (points[:, 1] / b) ** 2)
        return points / rho[:, None]
    raise ParameterError(f"unknown curve descriptor {curve!r}")


@dataclass
class Mesh:
    nodes: np.ndarray            # (N, 2)
    triangles: np.ndarray        # (T, 3) int, counterclockwise
    outer_boundary: np.ndarray   # ordered index ring, counterclockwise
    inner_boundary: np.ndarray | None = None
    region_tag: np.ndarray | None = None   # (T,) int, defaults to zeros
    outer_curve: Curve | None = field(default=None, compare=False)
    inner_curve: Curve | None = field(default=None, compare=False)
    interface_radius: float | None = field(default=None, compare=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.outer_boundary = np.asarray(self.outer_boundary, dtype=int)
        if self.inner_boundary is not None:
            self.inner_boundary = np.asarray(self.inner_boundary, dtype=int)
        if self.region_tag is None:
            self.region_tag = np.zeros(len(self.triangles), dtype=int)
        else:
            self.region_tag = np.asarray(self.region_tag, dtype=int)

    # -- geometry helpers -------------------------------------------------

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edge_set(self) -> set:
        edges = set()
        for tri in self.triangles:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                edges.add(frozenset((int(tri[a]), int(tri[b]))))
        return edges

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        p = self.nodes[self.triangles]
        worst = 180.0
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            u = p[:, j] - p[:, i]
            v = p[:, k] - p[:, i]
            c = (u * v).sum(axis=1) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
            )
            worst = min(worst, math.degrees(np.arccos(np.clip(c, -1, 1)).min()))
        return worst

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "version": MESH_FORMAT_VERSION,
            "nodes": [[float(x), float(y)] for x, y in self.nodes],
            "triangles": [[int(a), int(b), int(c)] for a, b, c in self.triangles],
            "outer_boundary": [int(i) for i in self.outer_boundary],
            "inner_boundary": (
                None
                if self.inner_boundary is None
                else [int(i) for i in self.inner_boundary]
            ),
            "region_tag": [int(t) for t in self.region_tag],
        }
        # json emits repr() of Python floats, 17 significant digits
        return json.dumps(payload)

    def save(self, path: str) -> None:
        tmp_fd, tmp_path = tempfile.mkstemp(
            dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
        )
        try:
            with os.fdopen(tmp_fd, "w") as fh:
                fh.write(self.to_json())
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise

    @classmethod
    def from_json(cls, text: str) -> "Mesh":
        data = json.loads(text)
        if data.get("version") != MESH_FORMAT_VERSION:
            raise ParameterError(f"unsupported mesh format version {data.get('version')}")
        return cls(
            nodes=np.array(data["nodes"], dtype=float),
            triangles=np.array(data["triangles"], dtype=int),
            outer_boundary=np.array(data["outer_boundary"], dtype=int),
            inner_boundary=(
                None
                if data["inner_boundary"] is None
                else np.array(data["inner_boundary"], dtype=int)
            ),
            region_tag=np.array(data["region_tag"], dtype=int),
        )

    @classmethod
    def load(cls, path: str) -> "Mesh":
        with open(path) as fh:
            return cls.from_json(fh.read())


# -- ring construction ----------------------------------------------------


def _ring_counts(radii: list[float], with_center: bool) -> list[int]:
    counts = []
    prev = 0.0 if with_center or len(radii) == 1 else 2 * radii[0] - radii[1]
    for r in radii:
        s = r - prev
        counts.append(max(6, 6 * int(round(r / s))))
        prev = r
    return counts


def _band_triangles(inner_idx, inner_ang, outer_idx, outer_ang):
    """Triangulate the band between two counterclockwise rings by angular merge."""
    na, nb = len(inner_idx), len(outer_idx)
    ia = list(inner_ang) + [inner_ang[0] + 2 * math.pi]
    ib = list(outer_ang) + [outer_ang[0] + 2 * math.pi]
    tris = []
    i = j = 0
    while i < na or j < nb:
        adv_inner = j >= nb or (i < na and ia[i + 1] <= ib[j + 1])
        if adv_inner:
            tris.append(
                (inner_idx[i], outer_idx[j % nb], inner_idx[(i + 1) % na])
            )
            i += 1
        else:
            tris.append(
                (inner_idx[i % na], outer_idx[j], outer_idx[(j + 1) % nb])
            )
            j += 1
    return tris


def mesh_from_radii(
    radii: list[float],
    interface_radius: float | None = None,
    with_center: bool = True,
    outer_curve: Curve | None = None,
    inner_curve: Curve | None = None,
) -> Mesh:
    """Concentric-ring triangulation over the given ascending ring radii.

    With ``with_center`` the innermost band is a fan around the origin
    (disk topology); otherwise the first ring is an inner boundary
    (annulus topology).  Triangles whose centroid lies inside
    ``interface_radius`` get region tag 0, the rest tag 1.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
        raise ParameterError("ring radii must be positive and strictly increasing")
    counts = _ring_counts(radii, with_center)

    nodes = []
    rings = []          # per ring: (index array, angle array)
    if with_center:
        nodes.append((0.0, 0.0))
    for r, c in zip(radii, counts):
        base = len(nodes)
        ang = [2 * math.pi * k / c for k in range(c)]
        nodes.extend((r * math.cos(t), r * math.sin(t)) for t in ang)
        rings.append((list(range(base, base + c)), ang))

    tris = []
    if with_center:
        idx0, _ = rings[0]
        c0 = len(idx0)
        tris.extend((0, idx0[k], idx0[(k + 1) % c0]) for k in range(c0))
    for (ii, ia), (oi, oa) in zip(rings, rings[1:]):
        tris.extend(_band_triangles(ii, ia, oi, oa))

    nodes = np.array(nodes)
    tris = np.array(tris, dtype=int)
    centroids = nodes[tris].mean(axis=1)
    if interface_radius is not None:
        tags = (np.hypot(centroids[:, 0], centroids[:, 1]) > interface_radius).astype(int)
    else:
        tags = np.zeros(len(tris), dtype=int)

    return Mesh(
        nodes=nodes,
        triangles=tris,
        outer_boundary=np.array(rings[-1][0], dtype=int),
        inner_boundary=None if with_center else np.array(rings[0][0], dtype=int),
        region_tag=tags,
        outer_curve=outer_curve,
        inner_curve=inner_curve,
        interface_radius=interface_radius,
    )


def _uniform_radii(r_from: float, r_to: float, h: float) -> list[float]:
    n = max(1, int(math.ceil((r_to - r_from) / h - 1e-12)))
    return [r_from + (r_to - r_from) * (k + 1) / n for k in range(n)]


def make_disk(radius: float, h: float, interface_radius: float | None = None) -> Mesh:
    """Disk of given radius centered at the origin with target edge length h.

    If ``interface_radius`` is given, one node ring lies exactly on that
    circle and region tags split the mesh across it.
    """
    if radius <= 0 or h <= 0 or h > radius / 4 + 1e-12:
        raise ParameterError(f"need 0 < h <= radius/4, got radius={radius}, h={h}")
    if interface_radius is not None and not (0 < interface_radius < radius):
        raise ParameterError("interface_radius must lie strictly inside the disk")
    if interface_radius is None:
        radii = _uniform_radii(0.0, radius, h)
    else:
        radii = _uniform_radii(0.0, interface_radius, h) + _uniform_radii(
            interface_radius, radius, h
        )
    return mesh_from_radii(
        radii,
        interface_radius=interface_radius,
        outer_curve=("circle", radius),
    )


def make_annulus(inner_radius: float, outer_radius: float, h: float) -> Mesh:
    """Annulus inner_radius <= |x| <= outer_radius."""
    if not (0 < inner_radius < outer_radius):
        raise ParameterError("need 0 < inner_radius < outer_radius")
    if h <= 0 or h > (outer_radius - inner_radius) / 2 + 1e-12:
        raise ParameterError("h too large for the annulus width")
    radii = [inner_radius] + _uniform_radii(inner_radius, outer_radius, h)
    return mesh_from_radii(
        radii,
        with_center=False,
        outer_curve=("circle", outer_radius),
        inner_curve=("circle", inner_radius),
    )


def make_ellipse(a: float, b: float, h: float) -> Mesh:
    """Ellipse x^2/a^2 + y^2/b^2 <= 1, built by scaling a unit-disk mesh."""
    if a <= 0 or b <= 0:
        raise ParameterError("semi-axes must be positive")
    if h <= 0 or h > min(a, b) / 4 + 1e-12:
        raise ParameterError("need h <= min(a, b)/4")
    disk = make_disk(1.0, h / max(a, b))
    nodes = disk.nodes * np.array([a, b])
    return Mesh(
        nodes=nodes,
        triangles=disk.triangles,
        outer_boundary=disk.outer_boundary,
        region_tag=disk.region_tag,
        outer_curve=("ellipse", a, b),
    )


def refine(mesh: Mesh) -> Mesh:
    """Uniform 4-way refinement with boundary/interface midpoint projection."""
    nodes = [tuple(p) for p in mesh.nodes]
    midpoint: dict[frozenset, int] = {}

    outer_edges = {
        frozenset((int(a), int(b))): pos
        for pos, (a, b) in enumerate(
            zip(mesh.outer_boundary, np.roll(mesh.outer_boundary, -1))
        )
    }
    inner_edges = {}
    if mesh.inner_boundary is not None:
        inner_edges = {
            frozenset((int(a), int(b))): pos
            for pos, (a, b) in enumerate(
                zip(mesh.inner_boundary, np.roll(mesh.inner_boundary, -1))
            )
        }

    r_if = mesh.interface_radius

    def mid_index(i: int, j: int) -> int:
        key = frozenset((i, j))
        if key in midpoint:
            return midpoint[key]
        p = 0.5 * (mesh.nodes[i] + mesh.nodes[j])
        if key in outer_edges and mesh.outer_curve is not None:
            p = _project_to_curve(p[None, :], mesh.outer_curve)[0]
        elif key in inner_edges and mesh.inner_curve is not None:
            p = _project_to_curve(p[None, :], mesh.inner_curve)[0]
        elif r_if is not None:
            ri = np.hypot(*mesh.nodes[i])
            rj = np.hypot(*mesh.nodes[j])
            if abs(ri - r_if) <= 1e-12 and abs(rj - r_if) <= 1e-12:
                p = r_if * p / np.hypot(*p)
        midpoint[key] = len(nodes)
        nodes.append((float(p[0]), float(p[1])))
        return midpoint[key]

    tris = []
    tags = []
    for tri, tag in zip(mesh.triangles, mesh.region_tag):
        i, j, k = (int(v) for v in tri)
        a, b, c = mid_index(i, j), mid_index(j, k), mid_index(k, i)
        tris.extend([(i, a, c), (a, j, b), (c, b, k), (a, b, c)])
        tags.extend([tag] * 4)

    def split_ring(ring, edges):
        out = []
        for a, b in zip(ring, np.roll(ring, -1)):
            out.append(int(a))
            out.append(midpoint[frozenset((int(a), int(b)))])
        return np.array(out, dtype=int)

    return Mesh(
        nodes=np.array(nodes),
        triangles=np.array(tris, dtype=int),
        outer_boundary=split_ring(mesh.outer_boundary, outer_edges),
        inner_boundary=(
            None
            if mesh.inner_boundary is None
            else split_ring(mesh.inner_boundary, inner_edges)
        ),
        region_tag=np.array(tags, dtype=int),
        outer_curve=mesh.outer_curve,
        inner_curve=mesh.inner_curve,
        interface_radius=mesh.interface_radius,
    )


def boundary_angles(mesh: Mesh) -> np.ndarray:
    """Polar angles in [0, 2pi) of the outer boundary ring, in ring order.

    The ring is rotated so the sequence starts at the minimal angle; the
    result is strictly increasing for the structured meshes built here.
    """
    if len(mesh.outer_boundary) == 0:
        raise GeometryError("empty outer boundary")
    pts = mesh.nodes[mesh.outer_boundary]
    if np.any(np.hypot(pts[:, 0], pts[:, 1]) < 1e-14):
        raise GeometryError("boundary node at the origin has no polar angle")
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * math.pi)
    shift = int(np.argmin(ang))
    ang = np.roll(ang, -shift)
    if np.any(np.diff(ang) <= 0):
        raise GeometryError("outer boundary angles not strictly increasing")
    return np.roll(ang, shift)


def boundary_ring_rotation(mesh: Mesh) -> int:
    """Index shift that makes boundary_angles start at the minimal angle."""
    pts = mesh.nodes[mesh.outer_boundary]
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * math.pi)
    return int(np.argmin(ang))
