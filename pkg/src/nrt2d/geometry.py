"""Smooth closed boundary curves, test disks, and the quadrature rules they carry.

Curves are stored at a fixed, even number of equispaced parameter nodes on
[0, 2pi).  All derived quantities (tangent speed, outward normals, arclength
weights, curvature) come from analytic parametrizations, except for
sample-table curves where they come from FFT differentiation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# fraction of the outer diameter kept clear between nested/inscribed shapes
DEFAULT_CLEARANCE_FACTOR = 0.02


class GeometryError(ValueError):
    """Invalid curve parameters or geometric constraint violation."""


class AmbiguousPointError(GeometryError):
    """Point too close to a curve for a reliable inside/outside decision."""


def _as_point(p):
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape != (2,):
        raise GeometryError(f"expected a 2D point, got shape {p.shape}")
    return p


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


# ----------------------------------------------------------------------------
# parametrizations: t -> (x, x', x'') each of shape (n, 2)

def _param_circle(t, params):
    r = float(params["radius"])
    if r <= 0:
        raise GeometryError(f"circle radius must be positive, got {r}")
    c = _as_point(params.get("center", (0.0, 0.0)))
    ct, st = np.cos(t), np.sin(t)
    x = c + r * np.stack([ct, st], axis=1)
    dx = r * np.stack([-st, ct], axis=1)
    ddx = r * np.stack([-ct, -st], axis=1)
    return x, dx, ddx


def _param_ellipse(t, params):
    a, b = float(params["a"]), float(params["b"])
    if a <= 0 or b <= 0:
        raise GeometryError(f"ellipse semi-axes must be positive, got a={a}, b={b}")
    c = _as_point(params.get("center", (0.0, 0.0)))
    ct, st = np.cos(t), np.sin(t)
    x = c + np.stack([a * ct, b * st], axis=1)
    dx = np.stack([-a * st, b * ct], axis=1)
    ddx = np.stack([-a * ct, -b * st], axis=1)
    return x, dx, ddx


def _param_kite(t, params):
    # x(t) = scale*(cos t + a cos 2t - a, b sin t), the usual kite test shape
    s = float(params.get("scale", 1.0))
    a = float(params.get("crossbar", 0.65))
    b = float(params.get("height", 1.5))
    if s <= 0 or b <= 0 or not (0.0 <= a <= 0.9):
        raise GeometryError(
            f"kite needs scale>0, height>0, 0<=crossbar<=0.9; got {s}, {b}, {a}"
        )
    c = _as_point(params.get("center", (0.0, 0.0)))
    ct, st = np.cos(t), np.sin(t)
    c2t, s2t = np.cos(2 * t), np.sin(2 * t)
    x = c + s * np.stack([ct + a * c2t - a, b * st], axis=1)
    dx = s * np.stack([-st - 2 * a * s2t, b * ct], axis=1)
    ddx = s * np.stack([-ct - 4 * a * c2t, -b * st], axis=1)
    return x, dx, ddx


def _param_peanut(t, params):
    # polar radius rho(t) = scale*sqrt(cos^2 t + w^2 sin^2 t), pinched for w < 1
    s = float(params.get("scale", 1.0))
    w = float(params.get("waist", 0.5))
    if s <= 0 or w <= 0:
        raise GeometryError(f"peanut needs scale>0 and waist>0, got {s}, {w}")
    c = _as_point(params.get("center", (0.0, 0.0)))
    ct, st = np.cos(t), np.sin(t)
    q = ct**2 + (w * st) ** 2
    dq = (w**2 - 1.0) * np.sin(2 * t)
    ddq = 2.0 * (w**2 - 1.0) * np.cos(2 * t)
    rho = s * np.sqrt(q)
    drho = s * dq / (2 * np.sqrt(q))
    ddrho = s * (ddq / (2 * np.sqrt(q)) - dq**2 / (4 * q**1.5))
    e = np.stack([ct, st], axis=1)
    de = np.stack([-st, ct], axis=1)
    x = c + rho[:, None] * e
    dx = drho[:, None] * e + rho[:, None] * de
    ddx = ddrho[:, None] * e + 2 * drho[:, None] * de - rho[:, None] * e
    return x, dx, ddx


def _fft_derivative(values, order=1):
    n = len(values)
    k = np.fft.rfftfreq(n, d=1.0 / n)  # 0, 1, ..., n/2
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0  # drop the unmatched Nyquist mode for odd derivatives
    return np.fft.irfft(np.fft.rfft(values) * mult, n)


def _param_table(t, params):
    table = np.asarray(params["table"], dtype=float)
    if table.ndim != 2 or table.shape[1] != 3:
        raise GeometryError("sample table must be an array of [t, x1, x2] rows")
    n = table.shape[0]
    tt = 2 * np.pi * np.arange(n) / n
    if len(t) != n or not np.allclose(table[:, 0], tt, atol=1e-12):
        raise GeometryError(
            "sample table parameters must be equispaced on [0, 2pi) and match the node count"
        )
    x = table[:, 1:3].copy()
    dx = np.stack([_fft_derivative(x[:, 0]), _fft_derivative(x[:, 1])], axis=1)
    ddx = np.stack([_fft_derivative(x[:, 0], 2), _fft_derivative(x[:, 1], 2)], axis=1)
    return x, dx, ddx


_PARAMETRIZATIONS = {
    "circle": _param_circle,
    "ellipse": _param_ellipse,
    "kite": _param_kite,
    "peanut": _param_peanut,
    "sample-table": _param_table,
}


# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Curve2D:
    """A smooth simple closed curve sampled at n equispaced parameter nodes.

    Normals point outward (counterclockwise orientation is enforced at
    construction) and ``weights`` are arclength quadrature weights, so
    ``weights.sum()`` approximates the perimeter spectrally.
    """

    kind: str
    params: dict = field(repr=False)
    t: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    speed: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    curvature: np.ndarray = field(repr=False)
    xp: np.ndarray = field(repr=False)

    @property
    def n(self):
        return len(self.t)

    @property
    def perimeter(self):
        return float(self.weights.sum())

    @property
    def diameter(self):
        p = self.points
        d2 = ((p[:, None, :] - p[None, :, :]) ** 2).sum(-1)
        return float(np.sqrt(d2.max()))

    def resample(self, n):
        """Same curve at a different node count (analytic or FFT interpolation)."""
        if self.kind == "sample-table":
            x1 = trig_interp(self.points[:, 0], n)
            x2 = trig_interp(self.points[:, 1], n)
            tt = 2 * np.pi * np.arange(n) / n
            return make_curve("sample-table", {"table": np.stack([tt, x1, x2], axis=1).tolist()}, n)
        return make_curve(self.kind, self.params, n)

    def to_json(self):
        rec = {"kind": self.kind, "params": dict(self.params), "nodes": self.n}
        return rec

    @staticmethod
    def from_json(rec):
        return make_curve(rec["kind"], rec["params"], rec["nodes"])


def trig_interp(values, m):
    """Trigonometric interpolation of equispaced periodic samples to m nodes.

    Exact for trigonometric polynomials resolved by both grids; downsampling is
    the spectral projection onto the coarser grid's modes.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    m = int(m)
    if m == n:
        return values.copy()
    if m % 2 != 0 or n % 2 != 0:
        raise GeometryError("trig_interp requires even node counts")
    spec = np.fft.fft(values)
    out = np.zeros(m, dtype=complex)
    kmax = min(n, m) // 2
    out[:kmax] = spec[:kmax]
    out[m - kmax + 1 :] = spec[n - kmax + 1 :]
    if m > n:
        out[n // 2] = 0.5 * spec[n // 2]
        out[m - n // 2] = 0.5 * spec[n // 2]
    else:
        out[m // 2] = spec[m // 2] + spec[n - m // 2]
    return np.fft.ifft(out).real * (m / n)


def _signed_area(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect_any(points):
    """Brute-force check whether any two non-adjacent polygon edges cross."""
    a = points
    b = np.roll(points, -1, axis=0)
    n = len(points)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (
            q[..., 1] - p[..., 1]
        ) * (r[..., 0] - p[..., 0])

    p1, p2 = a[:, None, :], b[:, None, :]
    q1, q2 = a[None, :, :], b[None, :, :]
    d1 = orient(p1, p2, q1)
    d2 = orient(p1, p2, q2)
    d3 = orient(q1, q2, p1)
    d4 = orient(q1, q2, p2)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    idx = np.arange(n)
    adjacent = (np.abs(idx[:, None] - idx[None, :]) <= 1) | (
        np.abs(idx[:, None] - idx[None, :]) == n - 1
    )
    crossing &= ~adjacent
    return bool(crossing.any())


def make_curve(kind, params, n):
    """Build a Curve2D of the given kind sampled at n equispaced nodes.

    Parameters
    ----------
    kind : one of 'circle', 'ellipse', 'kite', 'peanut', 'sample-table'
    params : dict of shape parameters (see the parametrization functions)
    n : even node count, at least 16

    Raises GeometryError for invalid parameters or a self-intersecting result.
    """
    if kind not in _PARAMETRIZATIONS:
        raise GeometryError(f"unknown curve kind {kind!r}")
    n = int(n)
    if n < 16 or n % 2 != 0:
        raise GeometryError(f"node count must be even and >= 16, got {n}")
    t = 2 * np.pi * np.arange(n) / n
    x, dx, ddx = _PARAMETRIZATIONS[kind](t, params)
    if _signed_area(x) < 0:
        raise GeometryError("curve must be oriented counterclockwise")
    speed = np.linalg.norm(dx, axis=1)
    if speed.min() <= 1e-14:
        raise GeometryError("degenerate parametrization: zero tangent speed")
    normals = np.stack([dx[:, 1], -dx[:, 0]], axis=1) / speed[:, None]
    weights = speed * (2 * np.pi / n)
    curvature = (dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / speed**3
    if _segments_intersect_any(x):
        raise GeometryError(f"{kind} curve with params {params} self-intersects")
    return Curve2D(
        kind=kind,
        params=dict(params),
        t=_freeze(t),
        points=_freeze(x),
        speed=_freeze(speed),
        normals=_freeze(normals),
        weights=_freeze(weights),
        curvature=_freeze(curvature),
        xp=_freeze(dx),
    )


# ----------------------------------------------------------------------------
# point membership and distances

def winding_numbers(curve, points, chunk=2048):
    """Winding number of the curve's node polygon around each query point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts), dtype=int)
    poly = curve.points
    nxt = np.roll(poly, -1, axis=0)
    for lo in range(0, len(pts), chunk):
        p = pts[lo : lo + chunk]
        v = poly[None, :, :] - p[:, None, :]
        w = nxt[None, :, :] - p[:, None, :]
        cross = v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]
        dot = (v * w).sum(-1)
        ang = np.arctan2(cross, dot)
        out[lo : lo + chunk] = np.rint(ang.sum(axis=1) / (2 * np.pi)).astype(int)
    return out


def distance_to_curve(curve, points, chunk=2048):
    """Distance from each query point to the curve's node polygon."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = curve.points
    b = np.roll(a, -1, axis=0)
    ab = b - a
    ab2 = (ab**2).sum(-1)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        p = pts[lo : lo + chunk]
        ap = p[:, None, :] - a[None, :, :]
        s = np.clip((ap * ab[None, :, :]).sum(-1) / ab2[None, :], 0.0, 1.0)
        closest = a[None, :, :] + s[..., None] * ab[None, :, :]
        d2 = ((p[:, None, :] - closest) ** 2).sum(-1)
        out[lo : lo + chunk] = np.sqrt(d2.min(axis=1))
    return out


def point_in_curve(curve, p):
    """True iff the winding number of the curve around p equals 1.

    Raises AmbiguousPointError when p lies within 1e-9 of the curve.
    """
    p = _as_point(p)
    if distance_to_curve(curve, p[None, :])[0] < 1e-9:
        raise AmbiguousPointError(f"point {p} lies on the curve within tolerance")
    return int(winding_numbers(curve, p[None, :])[0]) == 1


# ----------------------------------------------------------------------------
# disk quadrature and test domains

def disk_quadrature(center, radius, radial_order=16, angular_order=64):
    """Tensor polar rule on a disk: Gauss-Legendre in radius x trapezoid in angle.

    Exact for integrands polynomial in the radius up to degree
    2*radial_order - 1 (per angular Fourier mode resolved by angular_order).
    Returns (nodes, weights) with nodes of shape (radial_order*angular_order, 2).
    """
    if radial_order < 4 or angular_order < 4:
        raise GeometryError("quadrature orders must be >= 4")
    center = _as_point(center)
    if radius <= 0:
        raise GeometryError(f"disk radius must be positive, got {radius}")
    xi, vw = np.polynomial.legendre.leggauss(radial_order)
    r = 0.5 * radius * (xi + 1.0)
    wr = 0.5 * radius * vw
    th = 2 * np.pi * np.arange(angular_order) / angular_order
    wt = 2 * np.pi / angular_order
    rr, tt = np.meshgrid(r, th, indexing="ij")
    nodes = center + np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    weights = (wr[:, None] * r[:, None] * wt * np.ones_like(th)[None, :]).reshape(-1)
    return nodes, weights


@dataclass(frozen=True)
class TestDomain:
    """A candidate disk G with an interior quadrature rule for H1(G) products."""

    center: np.ndarray
    radius: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    domain_id: str = "G"

    @property
    def area(self):
        return float(np.pi * self.radius**2)

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = ((pts - self.center) ** 2).sum(-1)
        return d2 <= self.radius**2 * (1 + 1e-12)


def default_clearance(outer):
    return DEFAULT_CLEARANCE_FACTOR * outer.diameter


def make_test_domain(center, radius, domain_id=None, outer=None, clearance=None,
                     radial_order=16, angular_order=64):
    """Build a disk test domain, optionally enforcing closure-in-Omega with margin."""
    center = _as_point(center)
    if radius <= 0:
        raise GeometryError(f"test domain radius must be positive, got {radius}")
    if outer is not None:
        if clearance is None:
            clearance = default_clearance(outer)
        th = 2 * np.pi * np.arange(64) / 64
        rim = center + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        inside = winding_numbers(outer, rim) == 1
        dist = distance_to_curve(outer, rim)
        if not inside.all() or dist.min() < clearance:
            raise GeometryError(
                f"test disk (center={center.tolist()}, radius={radius}) not inside "
                f"the outer boundary with clearance {clearance:.4g}"
            )
    nodes, weights = disk_quadrature(center, radius, radial_order, angular_order)
    if domain_id is None:
        domain_id = f"disk({center[0]:.3f},{center[1]:.3f};{radius:.3f})"
    return TestDomain(center=_freeze(center), radius=float(radius),
                      nodes=_freeze(nodes), weights=_freeze(weights),
                      domain_id=str(domain_id))


# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneGeometry:
    """Known outer boundary plus ground-truth cavity, used only for synthesis."""

    outer: Curve2D
    cavity: Curve2D


def make_scene(outer, cavity, clearance=None):
    """Validate that the cavity sits strictly inside the outer curve with margin."""
    if clearance is None:
        clearance = default_clearance(outer)
    inside = winding_numbers(outer, cavity.points) == 1
    if not inside.all():
        raise GeometryError("cavity nodes must lie strictly inside the outer boundary")
    dist = distance_to_curve(outer, cavity.points)
    if dist.min() < clearance:
        raise GeometryError(
            f"cavity too close to the outer boundary: min distance {dist.min():.4g} "
            f"< clearance {clearance:.4g}"
        )
    return SceneGeometry(outer=outer, cavity=cavity)


def scene_to_json(scene):
    return {"outer": scene.outer.to_json(), "cavity": scene.cavity.to_json()}


def scene_from_json(rec):
    return make_scene(Curve2D.from_json(rec["outer"]), Curve2D.from_json(rec["cavity"]))
