"""Point cloud and mesh ingestion: OFF/XYZ parsing, surface sampling, normalization."""

from dataclasses import dataclass

import numpy as np


class ParseError(ValueError):
    """Input bytes do not form a valid OFF/XYZ document."""


@dataclass
class TriangleMesh:
    """Triangle soup: `vertices` is (v, 3) float64, `faces` is (f, 3) vertex indices."""

    vertices: np.ndarray
    faces: np.ndarray


@dataclass
class PointCloud:
    """Ordered 3D points with an optional category label.

    `points` is an (n, 3) float64 array; `label` is whatever category
    identifier the dataset uses (int index or name); `source_id` tracks the
    file or generator the cloud came from.
    """

    points: np.ndarray
    label: int | str | None = None
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.points)

    def with_points(self, points: np.ndarray) -> "PointCloud":
        return PointCloud(points, label=self.label, source_id=self.source_id)


def _as_text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError("input is not ASCII text") from exc
    return data


def parse_off(data: bytes | str) -> TriangleMesh:
    """Parse an ASCII OFF mesh into a TriangleMesh.

    Accepts both the standard two-line header ("OFF" alone, counts on the
    next line) and the variant where the counts are glued onto the magic
    word ("OFF3514 3546 0"), which is common in ModelNet files.

    Raises:
        ParseError: malformed header, non-triangle face, vertex index out of
            range, non-numeric token, or truncated body.
    """
    text = _as_text(data)
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty OFF document")
    first = lines[0]
    if not first.startswith("OFF"):
        raise ParseError("missing OFF magic in header")
    glued = first[3:].strip()
    if glued:
        counts_line, cursor = glued, 1
    else:
        if len(lines) < 2:
            raise ParseError("truncated OFF header: no count line")
        counts_line, cursor = lines[1], 2
    parts = counts_line.split()
    if len(parts) < 2:
        raise ParseError(f"bad OFF count line: {counts_line!r}")
    try:
        n_vertices, n_faces = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ParseError(f"non-integer counts in OFF header: {counts_line!r}") from exc
    if n_vertices < 0 or n_faces < 0:
        raise ParseError("negative counts in OFF header")
    if len(lines) - cursor < n_vertices + n_faces:
        raise ParseError(
            f"truncated OFF body: header declares {n_vertices} vertices and "
            f"{n_faces} faces, only {len(lines) - cursor} data lines present"
        )

    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for i in range(n_vertices):
        tokens = lines[cursor + i].split()
        if len(tokens) < 3:
            raise ParseError(f"vertex {i}: expected 3 coordinates, got {len(tokens)}")
        try:
            vertices[i] = [float(t) for t in tokens[:3]]
        except ValueError as exc:
            raise ParseError(f"vertex {i}: non-numeric coordinate") from exc
    if n_vertices and not np.isfinite(vertices).all():
        raise ParseError("non-finite vertex coordinate")

    faces = np.empty((n_faces, 3), dtype=np.int64)
    base = cursor + n_vertices
    for i in range(n_faces):
        tokens = lines[base + i].split()
        try:
            arity = int(tokens[0])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"face {i}: malformed face line") from exc
        if arity != 3:
            raise ParseError(f"face {i}: only triangles supported, got a {arity}-gon")
        if len(tokens) < 4:
            raise ParseError(f"face {i}: truncated face line")
        try:
            idx = [int(t) for t in tokens[1:4]]
        except ValueError as exc:
            raise ParseError(f"face {i}: non-integer vertex index") from exc
        for j in idx:
            if j < 0 or j >= n_vertices:
                raise ParseError(f"face {i}: vertex index {j} out of range")
        faces[i] = idx
    return TriangleMesh(vertices, faces)


def parse_xyz(data: bytes | str, label: int | str | None = None, source_id: str = "") -> PointCloud:
    """Parse whitespace-separated XYZ text: one point per non-empty row.

    Rows must have at least 3 numeric columns; extra columns (colors,
    normals, ...) are dropped.
    """
    text = _as_text(data)
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) < 3:
            raise ParseError(f"line {lineno}: expected at least 3 columns, got {len(tokens)}")
        try:
            rows.append((float(tokens[0]), float(tokens[1]), float(tokens[2])))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: non-numeric coordinate") from exc
    points = np.array(rows, dtype=np.float64).reshape(-1, 3)
    if len(points) and not np.isfinite(points).all():
        raise ParseError("non-finite coordinate in XYZ data")
    return PointCloud(points, label=label, source_id=source_id)


def format_xyz(cloud: PointCloud) -> str:
    """Serialize a cloud as XYZ text with round-trip-exact float formatting."""
    lines = [
        f"{float(x)!r} {float(y)!r} {float(z)!r}"
        for x, y, z in cloud.points
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_xyz(cloud: PointCloud, path) -> None:
    with open(path, "w") as handle:
        handle.write(format_xyz(cloud))


def write_cloud_csv(cloud: PointCloud, path) -> None:
    """Write a cloud as CSV with columns x,y,z and, if labelled, a label column."""
    with_label = cloud.label is not None
    with open(path, "w") as handle:
        handle.write("x,y,z,label\n" if with_label else "x,y,z\n")
        for x, y, z in cloud.points:
            row = f"{float(x)!r},{float(y)!r},{float(z)!r}"
            handle.write(f"{row},{cloud.label}\n" if with_label else row + "\n")


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_mesh(
    mesh: TriangleMesh,
    n: int,
    rng: np.random.Generator,
    return_face_indices: bool = False,
):
    """Draw n points uniformly over the mesh surface.

    Faces are chosen with probability proportional to area and positions are
    drawn with uniform barycentric coordinates, so the density is uniform per
    unit area. Deterministic for a fixed generator state.

    Raises:
        ValueError: every face degenerate (zero total area).
    """
    areas = triangle_areas(mesh)
    total = areas.sum()
    if not total > 0.0:
        raise ValueError("cannot sample mesh: all faces have zero area")
    face_ids = rng.choice(len(mesh.faces), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    a = mesh.vertices[mesh.faces[face_ids, 0]]
    b = mesh.vertices[mesh.faces[face_ids, 1]]
    c = mesh.vertices[mesh.faces[face_ids, 2]]
    points = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    cloud = PointCloud(points)
    if return_face_indices:
        return cloud, face_ids
    return cloud


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center the cloud on its centroid and scale the farthest point to norm 1.

    Raises:
        ValueError: degenerate cloud (all points identical or empty).
    """
    if len(cloud) == 0:
        raise ValueError("cannot normalize an empty cloud")
    centered = cloud.points - cloud.points.mean(axis=0)
    radius = np.linalg.norm(centered, axis=1).max()
    if radius < 1e-12:
        raise ValueError("degenerate cloud: all points identical")
    return cloud.with_points(centered / radius)


def subsample(cloud: PointCloud, n: int, rng: np.random.Generator) -> PointCloud:
    """Draw n distinct points without replacement, deterministically per seed."""
    if n > len(cloud):
        raise ValueError(f"cannot draw {n} points from a cloud of {len(cloud)}")
    idx = rng.choice(len(cloud), size=n, replace=False)
    return cloud.with_points(cloud.points[idx])
