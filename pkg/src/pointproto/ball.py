"""Poincare-ball geometry: geodesic distance, origin exponential map, and
analytic distance gradients with a numerically safe flat limit.

`c` is the positive curvature magnitude; the ball has radius 1/sqrt(c). As
c -> 0 the distance converges to twice the Euclidean distance, which is the
flat limit the tests pin down. All functions accept single vectors or
batches over leading axes.
"""

import numpy as np

# enforced interior gap: after projection, c*||x||^2 stays below 1 - margin
BOUNDARY_MARGIN = 1e-7
# arcosh argument floor; pairs at or below it are treated as coincident and
# get zero gradients (the derivative is singular at argument 1)
ACOSH_FLOOR = 1.0 + 1e-15

_TINY = 1e-12


def _check_curvature(c: float) -> None:
    if not (np.isfinite(c) and c > 0.0):
        raise ValueError(f"curvature must be a positive finite number, got {c!r}")


def _sq_norm(x: np.ndarray) -> np.ndarray:
    return (x * x).sum(axis=-1)


def project_to_ball(x: np.ndarray, c: float) -> np.ndarray:
    """Rescale any vector violating the interior safety margin back inside.

    The rescale target sits slightly below the margin so rounding cannot push
    a projected point back onto it.
    """
    _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    sq = _sq_norm(x)[..., None]
    limit = (1.0 - BOUNDARY_MARGIN) / c
    target = limit * (1.0 - 1e-9)
    scale = np.where(sq > limit, np.sqrt(target / np.maximum(sq, _TINY)), 1.0)
    return x * scale


def _require_inside(x: np.ndarray, c: float, name: str) -> None:
    if np.any(c * _sq_norm(x) >= 1.0):
        raise ValueError(f"{name} lies on or outside the ball (c*||x||^2 >= 1)")


def poincare_distance(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Geodesic distance (1/sqrt(c)) * arcosh(1 + 2c||x-y||^2 / ((1-c||x||^2)(1-c||y||^2))).

    The arcosh argument is clamped to ACOSH_FLOOR, which puts a tiny positive
    floor (about 4.5e-8/sqrt(c)) on the distance between coincident points.
    Inputs broadcast; both points must lie strictly inside the ball.
    """
    _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _require_inside(x, c, "x")
    _require_inside(y, c, "y")
    denom = (1.0 - c * _sq_norm(x)) * (1.0 - c * _sq_norm(y))
    arg = 1.0 + 2.0 * c * _sq_norm(x - y) / denom
    return np.arccosh(np.maximum(arg, ACOSH_FLOOR)) / np.sqrt(c)


def exp_map_origin(v: np.ndarray, c: float) -> np.ndarray:
    """Map tangent vectors at the origin into the ball: tanh(sqrt(c)||v||) * v / (sqrt(c)||v||).

    Total on finite inputs: v = 0 maps to the origin and tanh saturation plus
    the interior projection keep every output strictly inside the ball.
    """
    _check_curvature(c)
    v = np.asarray(v, dtype=np.float64)
    if not np.isfinite(v).all():
        raise ValueError("exp_map_origin expects finite input")
    r = np.linalg.norm(v, axis=-1, keepdims=True)
    a = np.sqrt(c) * r
    scale = np.where(a < _TINY, 1.0, np.tanh(a) / np.where(a < _TINY, 1.0, a))
    return project_to_ball(scale * v, c)


def exp_map_origin_jvp(v: np.ndarray, w: np.ndarray, c: float) -> np.ndarray:
    """Jacobian-vector product J_exp(v) @ w of the origin exponential map.

    The Jacobian g(r) I + g'(r) v v^T / r is symmetric, so this doubles as
    the vector-Jacobian product for backprop. The interior-margin rescale is
    treated as identity; it only activates at tanh saturation
    (sqrt(c)||v|| around 8 and beyond).
    """
    _check_curvature(c)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    r = np.linalg.norm(v, axis=-1, keepdims=True)
    a = np.sqrt(c) * r
    small = a < _TINY
    safe_a = np.where(small, 1.0, a)
    g = np.where(small, 1.0, np.tanh(safe_a) / safe_a)
    sech2 = 1.0 / np.cosh(safe_a) ** 2
    dg_dr = np.where(small, 0.0, np.sqrt(c) * (safe_a * sech2 - np.tanh(safe_a)) / safe_a**2)
    dot = (v * w).sum(axis=-1, keepdims=True)
    radial = np.where(small, 0.0, dg_dr * dot / np.where(small, 1.0, r))
    return g * w + radial * v


def _grad_pieces(x: np.ndarray, y: np.ndarray, c: float):
    ax = 1.0 - c * _sq_norm(x)[..., None]
    by = 1.0 - c * _sq_norm(y)[..., None]
    dsq = _sq_norm(x - y)[..., None]
    raw = 1.0 + 2.0 * c * dsq / (ax * by)
    return ax, by, dsq, raw


def cross_distance_grads(x: np.ndarray, y: np.ndarray, c: float):
    """Distances and their pair gradients for all rows of x against all rows of y.

    Args:
        x: (m, d) points strictly inside the ball.
        y: (k, d) points strictly inside the ball.

    Returns:
        (dist (m, k), grad_x (m, k, d), grad_y (m, k, d)); pairs inside the
        arcosh clamp region get zero gradients.
    """
    _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _require_inside(x, c, "x")
    _require_inside(y, c, "y")
    xb = x[:, None, :]
    yb = y[None, :, :]
    ax, by, dsq, raw = _grad_pieces(xb, yb, c)
    z = np.maximum(raw, ACOSH_FLOOR)
    dist = np.arccosh(z) / np.sqrt(c)
    clamped = raw <= ACOSH_FLOOR
    safe = np.where(clamped, 2.0, z)
    coef = 1.0 / (np.sqrt(c) * np.sqrt(safe * safe - 1.0))
    grad_x = coef * (4.0 * c / (ax * ax * by)) * (ax * (xb - yb) + c * dsq * xb)
    grad_y = coef * (4.0 * c / (ax * by * by)) * (by * (yb - xb) + c * dsq * yb)
    grad_x = np.where(clamped, 0.0, grad_x)
    grad_y = np.where(clamped, 0.0, grad_y)
    return dist[..., 0], grad_x, grad_y


def distance_grad(x: np.ndarray, y: np.ndarray, c: float):
    """Analytic (d d/dx, d d/dy) of poincare_distance at a single pair.

    Returns (grad_x, grad_y, clamped); `clamped` flags the coincident case
    where the pair sits in the arcosh clamp region and both gradients are
    zero by convention.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("distance_grad expects single vectors; use cross_distance_grads for batches")
    _, grad_x, grad_y = cross_distance_grads(x[None, :], y[None, :], c)
    _, _, _, raw = _grad_pieces(x, y, c)
    clamped = bool(raw[0] <= ACOSH_FLOOR)
    return grad_x[0, 0], grad_y[0, 0], clamped
