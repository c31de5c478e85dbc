"""Seeded generators for seven primitive surface families.

Provides dataset-free training material and the geometry fixtures the tests
lean on. Every family is constructed with its analytic surface centroid at
the origin; clouds are then scaled so the farthest point has norm exactly 1,
which keeps jitter-free invariants (all sphere norms 1, tetrahedron samples
on their 4 face planes) exact instead of sample-statistics approximate.
"""

from dataclasses import dataclass

import numpy as np

from .cloudio import PointCloud, TriangleMesh, sample_mesh

FAMILIES = ("sphere", "cube", "cylinder", "cone", "torus", "tetrahedron", "plane")

MIN_POINTS = 64
MAX_JITTER = 0.05

_CYLINDER_RADIUS = 0.5
_CYLINDER_HEIGHT = 2.0
_CONE_RADIUS = 1.0
_CONE_HEIGHT = 2.0
_TORUS_MAJOR = 1.0
_TORUS_MINOR = 0.35

# unit-norm regular tetrahedron vertices; face i is opposite vertex i, so the
# outward face normals are simply the negated vertices
TETRAHEDRON_VERTICES = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
) / np.sqrt(3.0)
_TETRAHEDRON_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass(frozen=True)
class ShapeSpec:
    """Recipe for one synthetic cloud; identical specs generate identical clouds."""

    family: str
    n_points: int = 512
    jitter_sigma: float = 0.0
    random_rotation: bool = False
    seed: int = 0


def tetrahedron_mesh() -> TriangleMesh:
    return TriangleMesh(TETRAHEDRON_VERTICES.copy(), _TETRAHEDRON_FACES.copy())


def _cube_mesh() -> TriangleMesh:
    corners = np.array(
        [[x, y, z] for x in (-1.0, 1.0) for y in (-1.0, 1.0) for z in (-1.0, 1.0)]
    )
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x faces
        (0, 4, 5, 1), (2, 3, 7, 6),  # y faces
        (0, 2, 6, 4), (1, 5, 7, 3),  # z faces
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append([a, b, c])
        faces.append([a, c, d])
    return TriangleMesh(corners, np.array(faces))


def _plane_mesh() -> TriangleMesh:
    corners = np.array(
        [[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]]
    )
    return TriangleMesh(corners, np.array([[0, 1, 2], [0, 2, 3]]))


def _sample_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    return v / norms


def _sample_cylinder(n: int, rng: np.random.Generator) -> np.ndarray:
    r, h = _CYLINDER_RADIUS, _CYLINDER_HEIGHT
    side_area = 2.0 * np.pi * r * h
    cap_area = np.pi * r * r
    probs = np.array([side_area, cap_area, cap_area])
    part = rng.choice(3, size=n, p=probs / probs.sum())
    theta = 2.0 * np.pi * rng.random(n)
    u = rng.random(n)
    points = np.empty((n, 3))
    side = part == 0
    points[side, 0] = r * np.cos(theta[side])
    points[side, 1] = r * np.sin(theta[side])
    points[side, 2] = h * (u[side] - 0.5)
    for cap, z in ((1, h / 2.0), (2, -h / 2.0)):
        mask = part == cap
        rad = r * np.sqrt(u[mask])
        points[mask, 0] = rad * np.cos(theta[mask])
        points[mask, 1] = rad * np.sin(theta[mask])
        points[mask, 2] = z
    return points


def _sample_cone(n: int, rng: np.random.Generator) -> np.ndarray:
    r, h = _CONE_RADIUS, _CONE_HEIGHT
    slant = np.sqrt(r * r + h * h)
    lateral_area = np.pi * r * slant
    base_area = np.pi * r * r
    apex = np.array([0.0, 0.0, h])
    # area centroid along the axis: lateral surface at h/3 above the base,
    # base disk at 0; subtracting it centers the shape analytically
    centroid_z = (lateral_area * (h / 3.0)) / (lateral_area + base_area)
    on_lateral = rng.random(n) < lateral_area / (lateral_area + base_area)
    theta = 2.0 * np.pi * rng.random(n)
    u = rng.random(n)
    points = np.empty((n, 3))
    t = np.sqrt(u[on_lateral])  # area grows linearly with distance from apex
    rim = np.stack(
        [r * np.cos(theta[on_lateral]), r * np.sin(theta[on_lateral]), np.zeros(on_lateral.sum())],
        axis=1,
    )
    points[on_lateral] = apex + t[:, None] * (rim - apex)
    base = ~on_lateral
    rad = r * np.sqrt(u[base])
    points[base, 0] = rad * np.cos(theta[base])
    points[base, 1] = rad * np.sin(theta[base])
    points[base, 2] = 0.0
    points[:, 2] -= centroid_z
    return points


def _sample_torus(n: int, rng: np.random.Generator) -> np.ndarray:
    big, small = _TORUS_MAJOR, _TORUS_MINOR
    # poloidal angle needs rejection sampling: surface density is
    # proportional to big + small*cos(psi)
    psi = np.empty(0)
    while len(psi) < n:
        cand = 2.0 * np.pi * rng.random(2 * n)
        accept = rng.random(2 * n) <= (big + small * np.cos(cand)) / (big + small)
        psi = np.concatenate([psi, cand[accept]])
    psi = psi[:n]
    phi = 2.0 * np.pi * rng.random(n)
    ring = big + small * np.cos(psi)
    return np.stack([ring * np.cos(phi), ring * np.sin(phi), small * np.sin(psi)], axis=1)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix via a normalized random quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def surface_points(family: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Raw (uncentered-scale, unjittered) surface samples for one family."""
    if family == "sphere":
        return _sample_sphere(n, rng)
    if family == "cube":
        return sample_mesh(_cube_mesh(), n, rng).points
    if family == "cylinder":
        return _sample_cylinder(n, rng)
    if family == "cone":
        return _sample_cone(n, rng)
    if family == "torus":
        return _sample_torus(n, rng)
    if family == "tetrahedron":
        return sample_mesh(tetrahedron_mesh(), n, rng).points
    if family == "plane":
        return sample_mesh(_plane_mesh(), n, rng).points
    raise ValueError(f"unknown shape family {family!r}; expected one of {FAMILIES}")


def generate(spec: ShapeSpec) -> PointCloud:
    """Generate one labelled cloud: surface samples, optional Gaussian jitter,
    optional uniform random rotation, then max-norm scaling onto the unit
    sphere. Deterministic per spec.
    """
    if spec.family not in FAMILIES:
        raise ValueError(f"unknown shape family {spec.family!r}; expected one of {FAMILIES}")
    if spec.n_points < MIN_POINTS:
        raise ValueError(f"n_points must be >= {MIN_POINTS}, got {spec.n_points}")
    if not 0.0 <= spec.jitter_sigma <= MAX_JITTER:
        raise ValueError(f"jitter_sigma must lie in [0, {MAX_JITTER}], got {spec.jitter_sigma}")
    rng = np.random.default_rng(spec.seed)
    points = surface_points(spec.family, spec.n_points, rng)
    if spec.jitter_sigma > 0.0:
        points = points + rng.normal(0.0, spec.jitter_sigma, size=points.shape)
    if spec.random_rotation:
        points = points @ random_rotation(rng).T
    points = points / np.linalg.norm(points, axis=1).max()
    return PointCloud(
        points,
        label=FAMILIES.index(spec.family),
        source_id=f"{spec.family}:{spec.seed}",
    )


def generate_dataset(
    families,
    clouds_per_family: int,
    n_points: int = 512,
    jitter_sigma: float = 0.0,
    random_rotation: bool = False,
    seed: int = 0,
) -> list[PointCloud]:
    """Generate clouds_per_family clouds per family, labelled by position in
    `families`. Per-cloud seeds derive from (seed, family index, cloud index),
    so any subset regenerates identically.
    """
    clouds = []
    for fam_idx, family in enumerate(families):
        for j in range(clouds_per_family):
            child = int(np.random.SeedSequence([seed, fam_idx, j]).generate_state(1)[0])
            cloud = generate(
                ShapeSpec(family, n_points, jitter_sigma, random_rotation, child)
            )
            cloud.label = fam_idx
            cloud.source_id = f"{family}:{j}"
            clouds.append(cloud)
    return clouds
