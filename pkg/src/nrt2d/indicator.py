"""Response functionals, H1 Gram matrices, and the regularized indicator.

The indicator of a test domain G is the supremum of the response functional
|int d_nu w * g| over probe traces g whose harmonic extensions have H1(G) norm
at most one.  Over a finite probe span with response vector r and Gram matrix
M this supremum is sqrt(r' M^+ r); M is severely ill conditioned (harmonic
functions on a small disk have exponentially decaying H1 ellipsoid axes), so
M^+ is a truncated eigendecomposition pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import DirichletSolver, MixedSolver
from .probes import ProbeError, eval_probe, probe_trace

DEFAULT_TRUNCATION = 1e-12


@dataclass(frozen=True)
class IndicatorResult:
    """Regularized indicator value for one test domain."""

    domain_id: str
    center: tuple
    radius: float
    value: float
    rank: int
    lambda_min: float  # smallest retained Gram eigenvalue
    lambda_max: float
    n_probes: int


def response_vector(trace, basis, outer):
    """One response integral per probe: r_k = int d_nu w * g_k dS."""
    if trace.n != outer.n:
        raise ValueError(
            f"trace has {trace.n} nodes but the curve has {outer.n}"
        )
    wv = trace.weights * trace.values
    r = np.empty(len(basis))
    for k, p in enumerate(basis):
        r[k] = wv @ probe_trace(p, outer)
    return r


def _eval_all(basis, nodes):
    k, nq = len(basis), len(nodes)
    vals = np.empty((k, nq))
    gx = np.empty((k, nq))
    gy = np.empty((k, nq))
    for i, p in enumerate(basis):
        v, g = eval_probe(p, nodes)
        vals[i], gx[i], gy[i] = v, g[:, 0], g[:, 1]
    return vals, gx, gy


def gram_matrix(basis, domain):
    """H1(G) Gram matrix of the probe family over the domain's quadrature."""
    for p in basis:
        if p.kind in ("monopole", "dipole"):
            d = np.linalg.norm(np.asarray(p.source) - domain.center)
            if d <= domain.radius + 1e-12:
                raise ProbeError(
                    f"probe {p.label()} is singular inside test domain "
                    f"{domain.domain_id}"
                )
    vals, gx, gy = _eval_all(basis, domain.nodes)
    w = domain.weights
    m = (vals * w) @ vals.T + (gx * w) @ gx.T + (gy * w) @ gy.T
    return 0.5 * (m + m.T)


def indicator_value(r, m, truncation=DEFAULT_TRUNCATION, eps=1.0,
                    domain_id="G", center=(0.0, 0.0), radius=0.0):
    """Constrained supremum sup{ |c.r| : c'Mc <= eps^2 } by truncated eigensolve.

    Eigenvalues below truncation * lambda_max are discarded; if nothing is
    retained the indicator is zero with rank zero.
    """
    r = np.asarray(r, dtype=float)
    m = np.asarray(m, dtype=float)
    if not 0 < truncation < 1:
        raise ValueError(f"truncation must lie in (0, 1), got {truncation}")
    lam, vec = np.linalg.eigh(m)
    lam_max = float(lam[-1]) if len(lam) else 0.0
    keep = lam >= truncation * lam_max
    if lam_max <= 0 or not keep.any():
        return IndicatorResult(
            domain_id=str(domain_id), center=tuple(np.asarray(center, float)),
            radius=float(radius), value=0.0, rank=0,
            lambda_min=0.0, lambda_max=max(lam_max, 0.0), n_probes=len(r),
        )
    proj = vec[:, keep].T @ r
    value = float(eps) * float(np.sqrt(np.sum(proj**2 / lam[keep])))
    return IndicatorResult(
        domain_id=str(domain_id), center=tuple(np.asarray(center, float)),
        radius=float(radius), value=value, rank=int(keep.sum()),
        lambda_min=float(lam[keep].min()), lambda_max=lam_max, n_probes=len(r),
    )


def key_identity_check(scene, f, probe, mixed_solver=None, dirichlet_solver=None):
    """Both sides of the response identity and their relative residual.

    Left side integrates the Neumann response against the probe trace on the
    outer boundary; the right side integrates the (test-only) field trace on
    the cavity against the probe's analytic normal derivative there, with a
    minus sign.
    """
    outer, cav = scene.outer, scene.cavity
    f = np.asarray(f, dtype=float)
    if mixed_solver is None:
        mixed_solver = MixedSolver(scene)
    if dirichlet_solver is None:
        dirichlet_solver = DirichletSolver(outer)
    sol = mixed_solver.solve(f)
    dnu_w = sol.neumann_outer - dirichlet_solver.neumann_trace(f)
    g = probe_trace(probe, outer)
    lhs = float(np.sum(outer.weights * dnu_w * g))
    _, grads = eval_probe(probe, cav.points)
    dnu_z = (grads * cav.normals).sum(-1)
    rhs = -float(np.sum(cav.weights * sol.cavity_trace * dnu_z))
    rel = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + np.finfo(float).eps)
    return lhs, rhs, rel
