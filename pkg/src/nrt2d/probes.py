"""Harmonic probe functions: polynomial and exterior-source families.

Every probe is harmonic wherever it is defined and carries closed-form values
and gradients, so its harmonic extension from a boundary trace is the probe
itself; no PDE solve is involved on the probing side.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    GeometryError,
    TestDomain,
    distance_to_curve,
    winding_numbers,
)

SINGULARITY_TOL = 1e-9


class ProbeError(ValueError):
    """Invalid probe configuration or evaluation at a singular point."""


@dataclass(frozen=True)
class Probe:
    """One harmonic probe.

    kind 'poly':     scale * Re/Im ((x1-c1) + i(x2-c2))**degree
    kind 'monopole': scale * (-1/2pi) log|x - source|
    kind 'dipole':   scale * (-1/2pi) direction.(x - source)/|x - source|^2
    """

    kind: str
    degree: int = 0
    parity: str = "cos"  # poly only: cos = real part, sin = imaginary part
    center: tuple = (0.0, 0.0)
    source: tuple = (0.0, 0.0)
    direction: tuple = (1.0, 0.0)
    scale: float = 1.0

    def label(self):
        if self.kind == "poly":
            return f"poly{self.degree}{self.parity}"
        s = f"({self.source[0]:.4g},{self.source[1]:.4g})"
        if self.kind == "monopole":
            return f"mono{s}"
        return f"dip{s}a({self.direction[0]:.3g},{self.direction[1]:.3g})"


def _check_clear_of_singularity(probe, pts):
    if probe.kind == "poly":
        return
    d = np.linalg.norm(pts - np.asarray(probe.source), axis=-1)
    if d.min() < SINGULARITY_TOL:
        raise ProbeError(
            f"evaluation point within {SINGULARITY_TOL} of the {probe.kind} "
            f"singularity at {probe.source}"
        )


def eval_probe(probe, points):
    """Closed-form values and gradients of a probe at an (n, 2) point array.

    Returns (values, gradients) of shapes (n,) and (n, 2).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _check_clear_of_singularity(probe, pts)
    s = probe.scale
    if probe.kind == "poly":
        z = (pts[:, 0] - probe.center[0]) + 1j * (pts[:, 1] - probe.center[1])
        m = probe.degree
        zm = z**m
        dz = m * z ** (m - 1) if m >= 1 else np.zeros_like(z)
        if probe.parity == "cos":
            vals = zm.real
            grads = np.stack([dz.real, -dz.imag], axis=1)
        else:
            vals = zm.imag
            grads = np.stack([dz.imag, dz.real], axis=1)
        return s * vals, s * grads
    r = pts - np.asarray(probe.source, dtype=float)
    r2 = (r**2).sum(-1)
    if probe.kind == "monopole":
        vals = -np.log(r2) / (4 * np.pi)
        grads = -r / (2 * np.pi * r2[:, None])
        return s * vals, s * grads
    if probe.kind == "dipole":
        a = np.asarray(probe.direction, dtype=float)
        adotr = r @ a
        vals = -adotr / (2 * np.pi * r2)
        grads = -(a[None, :] - 2 * adotr[:, None] * r / r2[:, None]) / (
            2 * np.pi * r2[:, None]
        )
        return s * vals, s * grads
    raise ProbeError(f"unknown probe kind {probe.kind!r}")


def probe_is_exterior(probe, curve, standoff=0.0):
    """Whether the probe's singularity (if any) lies outside the closed curve."""
    if probe.kind == "poly":
        return True
    src = np.asarray(probe.source, dtype=float)[None, :]
    if distance_to_curve(curve, src)[0] < max(standoff, SINGULARITY_TOL):
        return False
    return int(winding_numbers(curve, src)[0]) == 0


def probe_trace(probe, boundary):
    """Boundary samples g_i of the probe on a curve; requires an exterior singularity."""
    if not probe_is_exterior(probe, boundary):
        raise ProbeError(
            f"probe {probe.label()} has a singularity inside or on the boundary; "
            "it is not admissible as a Dirichlet trace"
        )
    vals, _ = eval_probe(probe, boundary.points)
    return vals


@dataclass(frozen=True)
class ProbeBasis:
    """Deterministically ordered finite family of probes."""

    probes: tuple
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.probes)

    def __iter__(self):
        return iter(self.probes)

    def __getitem__(self, i):
        return self.probes[i]


def build_basis(outer, max_poly_degree=12, n_sources=16, r_ext_factor=1.5,
                dipoles=True, standoff=None, center=None):
    """Probe family: constant, cos/sin harmonic polynomials, then exterior sources.

    Exterior monopoles (and optionally radial/tangential dipole pairs) sit on a
    circle of radius r_ext_factor times the largest node radius of the outer
    boundary, measured from its node centroid.
    """
    if max_poly_degree < 0 or n_sources < 0:
        raise ProbeError("max_poly_degree and n_sources must be nonnegative")
    if center is None:
        center = outer.points.mean(axis=0)
    center = np.asarray(center, dtype=float)
    max_r = float(np.linalg.norm(outer.points - center, axis=1).max())
    if standoff is None:
        standoff = 0.1 * max_r
    r_ext = r_ext_factor * max_r
    if n_sources > 0 and r_ext <= max_r + standoff:
        raise ProbeError(
            f"exterior source radius {r_ext:.4g} must exceed the boundary radius "
            f"{max_r:.4g} plus standoff {standoff:.4g}"
        )
    probes = [Probe(kind="poly", degree=0, parity="cos", center=tuple(center))]
    for m in range(1, max_poly_degree + 1):
        probes.append(Probe(kind="poly", degree=m, parity="cos", center=tuple(center)))
        probes.append(Probe(kind="poly", degree=m, parity="sin", center=tuple(center)))
    for k in range(n_sources):
        th = 2 * np.pi * k / n_sources
        e_r = (np.cos(th), np.sin(th))
        src = (center[0] + r_ext * e_r[0], center[1] + r_ext * e_r[1])
        probes.append(Probe(kind="monopole", source=src))
    if dipoles:
        for k in range(n_sources):
            th = 2 * np.pi * k / n_sources
            e_r = (np.cos(th), np.sin(th))
            e_t = (-np.sin(th), np.cos(th))
            src = (center[0] + r_ext * e_r[0], center[1] + r_ext * e_r[1])
            probes.append(Probe(kind="dipole", source=src, direction=e_r))
            probes.append(Probe(kind="dipole", source=src, direction=e_t))
    cfg = {
        "max_poly_degree": int(max_poly_degree),
        "n_sources": int(n_sources),
        "r_ext_factor": float(r_ext_factor),
        "dipoles": bool(dipoles),
    }
    return ProbeBasis(probes=tuple(probes), config=cfg)


def h1_product(domain, va, ga, vb, gb):
    w = domain.weights
    return float(np.sum(w * (va * vb + (ga * gb).sum(-1))))


def h1_norm(probe, domain):
    """H1(G) norm of a probe over a test domain's quadrature rule."""
    vals, grads = eval_probe(probe, domain.nodes)
    return float(np.sqrt(h1_product(domain, vals, grads, vals, grads)))


def normalized_dipole(y, a, domain, eps):
    """Dipole at y scaled so its H1 norm on the domain stays below eps/2.

    The scale is (eps/2) / (|F|_{H1(G)} + 1), which bounds the scaled norm by
    eps/2 for any source position outside the closed domain.
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    a = a / np.linalg.norm(a)
    if np.linalg.norm(y - domain.center) <= domain.radius:
        raise ProbeError(f"dipole source {y.tolist()} lies inside the test domain")
    raw = Probe(kind="dipole", source=tuple(y), direction=tuple(a))
    norm = h1_norm(raw, domain)
    return replace(raw, scale=0.5 * eps / (norm + 1.0))


def runge_fit(target, basis, domain, truncation=1e-13):
    """Least-squares fit of a probe by a basis in the H1 inner product of a domain.

    Solves the normal equations by eigendecomposition, truncating eigenvalues
    below truncation * lambda_max.  Returns (coefficients, residual, info)
    where residual is the achieved H1(domain) distance and info records the
    target norm, retained rank, and a rank-deficiency flag.
    """
    tv, tg = eval_probe(target, domain.nodes)
    tnorm2 = h1_product(domain, tv, tg, tv, tg)
    tnorm = float(np.sqrt(tnorm2))
    k = len(basis)
    if k == 0:
        return np.zeros(0), tnorm, {"target_norm": tnorm, "rank": 0, "deficient": False}
    vals = np.empty((k, len(domain.weights)))
    gx = np.empty_like(vals)
    gy = np.empty_like(vals)
    for i, p in enumerate(basis):
        v, g = eval_probe(p, domain.nodes)
        vals[i], gx[i], gy[i] = v, g[:, 0], g[:, 1]
    w = domain.weights
    gram = (vals * w) @ vals.T + (gx * w) @ gx.T + (gy * w) @ gy.T
    gram = 0.5 * (gram + gram.T)
    b = (vals * w) @ tv + (gx * w) @ tg[:, 0] + (gy * w) @ tg[:, 1]
    lam, vec = np.linalg.eigh(gram)
    cutoff = truncation * max(lam[-1], 0.0)
    keep = lam > cutoff
    coeff = vec[:, keep] @ ((vec[:, keep].T @ b) / lam[keep])
    res2 = tnorm2 - 2.0 * coeff @ b + coeff @ gram @ coeff
    residual = float(np.sqrt(max(res2, 0.0)))
    info = {
        "target_norm": tnorm,
        "rank": int(keep.sum()),
        "deficient": bool((~keep).any()),
    }
    return coeff, residual, info


def harmonicity_defect(probe, points, h=1e-4):
    """Five-point Laplacian of the probe relative to its second-derivative scale."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    f0, _ = eval_probe(probe, pts)
    fxp, _ = eval_probe(probe, pts + e1)
    fxm, _ = eval_probe(probe, pts - e1)
    fyp, _ = eval_probe(probe, pts + e2)
    fym, _ = eval_probe(probe, pts - e2)
    lap = (fxp + fxm + fyp + fym - 4 * f0) / h**2
    dxx = (fxp - 2 * f0 + fxm) / h**2
    dyy = (fyp - 2 * f0 + fym) / h**2
    scale = np.abs(dxx) + np.abs(dyy) + 1.0
    return np.abs(lap) / scale
