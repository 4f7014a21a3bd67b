"""Boundary-integral forward solvers for the cavity problem and its background.

The field u solves Laplace's equation in the region between the outer boundary
and the cavity, with Dirichlet data on the outer curve and a zero Neumann
condition on the cavity.  It is represented as a double-layer potential on the
outer curve plus a single-layer potential on the cavity; both diagonal blocks
of the resulting system are second kind, so plain trapezoid Nystrom quadrature
converges spectrally on smooth curves.  Neumann traces on the outer curve use
the tangential-derivative identity for the hypersingular operator,
T phi = d/ds S (d phi/ds), with the log-kernel handled by Kress quadrature.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .geometry import Curve2D, SceneGeometry, default_clearance, trig_interp

FLUX_TOL = 1e-8


class SolverError(RuntimeError):
    """Forward solve failed (singular or badly inaccurate linear system)."""


# ----------------------------------------------------------------------------
# kernels; densities are node samples, arclength weights are absorbed

def _diffs(targets, src):
    d = targets[:, None, :] - src.points[None, :, :]
    r2 = (d**2).sum(-1)
    return d, r2


def slp_value(src, targets):
    """(S chi)(x_i) for targets off the source curve."""
    d, r2 = _diffs(targets, src)
    return -np.log(r2) / (4 * np.pi) * src.weights[None, :]


def slp_normal_deriv(src, targets, target_normals):
    d, r2 = _diffs(targets, src)
    num = (d * target_normals[:, None, :]).sum(-1)
    return -num / (2 * np.pi * r2) * src.weights[None, :]


def dlp_value(src, targets):
    """(D phi)(x_i) for targets off the source curve."""
    d, r2 = _diffs(targets, src)
    num = (d * src.normals[None, :, :]).sum(-1)
    return num / (2 * np.pi * r2) * src.weights[None, :]


def dlp_normal_deriv(src, targets, target_normals):
    d, r2 = _diffs(targets, src)
    dn_src = (d * src.normals[None, :, :]).sum(-1)
    dn_tgt = (d * target_normals[:, None, :]).sum(-1)
    nn = (target_normals[:, None, :] * src.normals[None, :, :]).sum(-1)
    ker = (nn / r2 - 2 * dn_src * dn_tgt / r2**2) / (2 * np.pi)
    return ker * src.weights[None, :]


def dlp_self(curve):
    """Boundary double-layer operator K; the diagonal is the curvature limit."""
    d, r2 = _diffs(curve.points, curve)
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = (d * curve.normals[None, :, :]).sum(-1) / (2 * np.pi * r2)
    np.fill_diagonal(ker, -curve.curvature / (4 * np.pi))
    return ker * curve.weights[None, :]


def adjoint_dlp_self(curve):
    """Boundary adjoint double-layer operator K' (normal at the target)."""
    d, r2 = _diffs(curve.points, curve)
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = -(d * curve.normals[:, None, :]).sum(-1) / (2 * np.pi * r2)
    np.fill_diagonal(ker, -curve.curvature / (4 * np.pi))
    return ker * curve.weights[None, :]


# ----------------------------------------------------------------------------
# on-curve single layer with logarithmic-kernel splitting

def kress_log_weights(n):
    """Quadrature matrix R for int_0^2pi log(4 sin^2((t-s)/2)) f(s) ds on n nodes."""
    if n % 2 != 0:
        raise ValueError("Kress log quadrature needs an even node count")
    half = n // 2
    s = 2 * np.pi * np.arange(n) / n
    m = np.arange(1, half)
    row = -(4 * np.pi / n) * (np.cos(np.outer(s, m)) / m).sum(axis=1)
    row -= (4 * np.pi / n**2) * np.cos(half * s)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return row[idx]


def slp_self(curve):
    """Matrix applying the on-curve single layer to a pure-dt integrand.

    (S h)(t_i) ~ sum_j SL[i, j] h_j   for   (S h)(t) = int Phi(x(t), x(s)) h(s) ds,
    with the 2D Laplace fundamental solution Phi = -(1/2pi) log|x - y|.
    """
    n = curve.n
    t = curve.t
    d = curve.points[:, None, :] - curve.points[None, :, :]
    r2 = (d**2).sum(-1)
    sin2 = 4 * np.sin(0.5 * (t[:, None] - t[None, :])) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        smooth = np.log(r2 / sin2)
    np.fill_diagonal(smooth, 2 * np.log(curve.speed))
    log_part = kress_log_weights(n)
    return -(log_part + (2 * np.pi / n) * smooth) / (4 * np.pi)


def fourier_diff(values):
    """Spectral derivative d/dt of equispaced periodic samples."""
    n = len(values)
    k = np.fft.rfftfreq(n, d=1.0 / n)
    mult = 1j * k
    mult[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(values) * mult, n)


def hypersingular_apply(curve, phi, slp_mat=None):
    """Normal derivative on the curve of the double-layer potential with density phi."""
    if slp_mat is None:
        slp_mat = slp_self(curve)
    omega = slp_mat @ fourier_diff(phi)
    return fourier_diff(omega) / curve.speed


# ----------------------------------------------------------------------------

def _factorize(a, what):
    try:
        lu = lu_factor(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise SolverError(f"{what}: singular boundary system ({exc})") from exc
    if not np.all(np.isfinite(lu[0])):
        raise SolverError(f"{what}: non-finite factorization")
    diag = np.abs(np.diagonal(lu[0]))
    if diag.min() < 1e-14 * diag.max():
        raise SolverError(
            f"{what}: boundary system numerically singular "
            f"(pivot ratio {diag.min() / diag.max():.2e})"
        )
    return lu


class DirichletSolver:
    """Interior Dirichlet problem on a single smooth closed curve.

    Provides the Neumann trace (Dirichlet-to-Neumann map) and interior
    evaluation of the harmonic extension.
    """

    def __init__(self, curve):
        self.curve = curve
        self._k = dlp_self(curve)
        self._lu = _factorize(self._k - 0.5 * np.eye(curve.n), "Dirichlet solve")
        self._slp = slp_self(curve)

    def density(self, f):
        return lu_solve(self._lu, np.asarray(f, dtype=float))

    def neumann_trace(self, f):
        return hypersingular_apply(self.curve, self.density(f), self._slp)

    def interior(self, points, f):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return dlp_value(self.curve, pts) @ self.density(f)


@dataclass(frozen=True)
class MixedSolution:
    """One solve of the cavity problem; exposes traces needed by tests only."""

    scene: SceneGeometry
    f: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    neumann_outer: np.ndarray = field(repr=False)
    cavity_trace: np.ndarray = field(repr=False)

    def interior(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return dlp_value(self.scene.outer, pts) @ self.phi + slp_value(
            self.scene.cavity, pts
        ) @ self.chi


class MixedSolver:
    """Dirichlet data on the outer curve, zero Neumann flux on the cavity."""

    def __init__(self, scene):
        self.scene = scene
        outer, cav = scene.outer, scene.cavity
        gap = _min_curve_gap(outer, cav)
        if gap < default_clearance(outer):
            warnings.warn(
                f"outer and cavity curves are {gap:.3g} apart; "
                "the boundary system may be badly conditioned",
                stacklevel=2,
            )
        n0, n1 = outer.n, cav.n
        a = np.zeros((n0 + n1, n0 + n1))
        a[:n0, :n0] = dlp_self(outer) - 0.5 * np.eye(n0)
        a[:n0, n0:] = slp_value(cav, outer.points)
        a[n0:, :n0] = dlp_normal_deriv(outer, cav.points, cav.normals)
        a[n0:, n0:] = adjoint_dlp_self(cav) - 0.5 * np.eye(n1)
        self._lu = _factorize(a, "mixed solve")
        self._slp_outer = slp_self(outer)
        self._slp_cav = slp_self(cav)
        self._dlp_out_to_cav = dlp_value(outer, cav.points)
        self._grad_slp_cav_to_out = slp_normal_deriv(cav, outer.points, outer.normals)

    def solve(self, f):
        outer, cav = self.scene.outer, self.scene.cavity
        f = np.asarray(f, dtype=float)
        if f.shape != (outer.n,):
            raise ValueError(f"f must have one sample per outer node ({outer.n})")
        rhs = np.concatenate([f, np.zeros(cav.n)])
        sol = lu_solve(self._lu, rhs)
        phi, chi = sol[: outer.n], sol[outer.n :]
        dnu_u = hypersingular_apply(outer, phi, self._slp_outer)
        dnu_u = dnu_u + self._grad_slp_cav_to_out @ chi
        u_cav = self._dlp_out_to_cav @ phi + self._slp_cav @ (chi * cav.speed)
        return MixedSolution(
            scene=self.scene, f=f, phi=phi, chi=chi,
            neumann_outer=dnu_u, cavity_trace=u_cav,
        )


def _min_curve_gap(a, b):
    from .geometry import distance_to_curve

    return min(
        float(distance_to_curve(a, b.points).min()),
        float(distance_to_curve(b, a.points).min()),
    )


# ----------------------------------------------------------------------------
# measurement containers

@dataclass(frozen=True)
class CauchyData:
    """Paired Dirichlet/Neumann samples of the field on the outer boundary."""

    t: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    dnu_u: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.t)

    def flux_residual(self):
        total = float(np.sum(self.weights * self.dnu_u))
        scale = float(np.sum(self.weights * np.abs(self.dnu_u)))
        return abs(total) / max(scale, 1e-300)

    def validate(self, tol_flux=FLUX_TOL, require_nonconstant=True):
        n = self.n
        if not (len(self.f) == len(self.dnu_u) == len(self.weights) == n):
            raise ValueError("Cauchy data arrays must share one length")
        if require_nonconstant and np.std(self.f) <= 1e-10 * (abs(np.mean(self.f)) + 1):
            raise ValueError("boundary data f must be a non-constant function")
        if self.flux_residual() > tol_flux:
            raise ValueError(
                f"net boundary flux {self.flux_residual():.3e} exceeds {tol_flux:.1e}"
            )
        return self

    def to_json(self):
        return {
            "t": self.t.tolist(),
            "f": self.f.tolist(),
            "dnu_u": self.dnu_u.tolist(),
            "weights": self.weights.tolist(),
            "meta": dict(self.meta),
        }

    @staticmethod
    def from_json(rec, require_nonconstant=True):
        data = CauchyData(
            t=np.asarray(rec["t"], dtype=float),
            f=np.asarray(rec["f"], dtype=float),
            dnu_u=np.asarray(rec["dnu_u"], dtype=float),
            weights=np.asarray(rec["weights"], dtype=float),
            meta=dict(rec.get("meta", {})),
        )
        return data.validate(require_nonconstant=require_nonconstant)


@dataclass(frozen=True)
class ResponseTrace:
    """Neumann trace of the response w = u - v on the outer boundary."""

    t: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.t)

    def flux_residual(self):
        total = float(np.sum(self.weights * self.values))
        scale = float(np.sum(self.weights * np.abs(self.values)))
        return abs(total) / max(scale, 1e-300)


# ----------------------------------------------------------------------------
# public operations

def solve_mixed_bvp(scene, f, solver=None, _allow_constant=False, meta=None):
    """Synthesize Cauchy data for the cavity problem from Dirichlet samples f."""
    f = np.asarray(f, dtype=float)
    if not _allow_constant and np.std(f) <= 1e-10 * (abs(np.mean(f)) + 1):
        raise ValueError("boundary data f must be a non-constant function")
    if solver is None:
        solver = MixedSolver(scene)
    sol = solver.solve(f)
    meta = dict(meta or {})
    meta.setdefault("n_nodes", scene.outer.n)
    meta.setdefault("noise", 0.0)
    meta.setdefault("seed", 0)
    data = CauchyData(
        t=scene.outer.t, f=f, dnu_u=sol.neumann_outer,
        weights=scene.outer.weights, meta=meta,
    )
    return data.validate(require_nonconstant=not _allow_constant)


def solve_dirichlet(outer, f, solver=None):
    """Neumann trace of the cavity-free harmonic extension of f on the outer curve."""
    f = np.asarray(f, dtype=float)
    if f.shape != (outer.n,):
        raise ValueError(f"f must have one sample per node ({outer.n})")
    if solver is None:
        solver = DirichletSolver(outer)
    return solver.neumann_trace(f)


def response_trace(cauchy, outer, solver=None):
    """Neumann response d_nu w = d_nu u - d_nu v on the outer boundary."""
    if cauchy.n != outer.n:
        raise ValueError(
            f"Cauchy data has {cauchy.n} nodes but the curve has {outer.n}; "
            "resample one of them first"
        )
    dnu_v = solve_dirichlet(outer, cauchy.f, solver=solver)
    meta = {"source": dict(cauchy.meta)}
    return ResponseTrace(
        t=cauchy.t, values=cauchy.dnu_u - dnu_v, weights=cauchy.weights, meta=meta
    )


def resample_cauchy(cauchy, n):
    """Trigonometric resampling of Cauchy data to n equispaced nodes."""
    if n == cauchy.n:
        return cauchy
    scale = n / cauchy.n
    return CauchyData(
        t=2 * np.pi * np.arange(n) / n,
        f=trig_interp(cauchy.f, n),
        dnu_u=trig_interp(cauchy.dnu_u, n),
        weights=trig_interp(cauchy.weights, n),
        meta={**cauchy.meta, "resampled_from": cauchy.n},
    )


def add_noise(cauchy, delta, seed):
    """Gaussian noise on the Neumann samples, re-projected to zero total flux."""
    if delta < 0:
        raise ValueError("noise level must be nonnegative")
    if delta == 0:
        return replace(cauchy, meta={**cauchy.meta, "noise": 0.0, "seed": int(seed)})
    rng = np.random.default_rng(int(seed))
    rms = float(np.sqrt(np.mean(cauchy.dnu_u**2)))
    noisy = cauchy.dnu_u + delta * rms * rng.standard_normal(cauchy.n)
    noisy = noisy - np.sum(cauchy.weights * noisy) / np.sum(cauchy.weights)
    return CauchyData(
        t=cauchy.t, f=cauchy.f, dnu_u=noisy, weights=cauchy.weights,
        meta={**cauchy.meta, "noise": float(delta), "seed": int(seed)},
    )


def annulus_oracle(r0, r1, cos_coeffs, sin_coeffs=()):
    """Exact Neumann coefficients for concentric disks (separation of variables).

    For Dirichlet data sum_m a_m cos(m t) + b_m sin(m t) on the outer circle of
    radius r0 with an inner radius-r1 cavity, mode m >= 1 of the Neumann trace
    is multiplied by

        lambda_m = m (r0^{2m} - r1^{2m}) / (r0 (r0^{2m} + r1^{2m}))

    and the constant mode maps to zero.  Returns (cos_out, sin_out).
    """
    if not 0 < r1 < r0:
        raise ValueError(f"need 0 < r1 < r0, got r1={r1}, r0={r0}")
    cos_coeffs = np.asarray(cos_coeffs, dtype=float)
    sin_coeffs = np.asarray(sin_coeffs, dtype=float)

    def lam(m):
        if m == 0:
            return 0.0
        p0, p1 = r0 ** (2 * m), r1 ** (2 * m)
        return m * (p0 - p1) / (r0 * (p0 + p1))

    cos_out = np.array([lam(m) * c for m, c in enumerate(cos_coeffs)])
    sin_out = np.array([lam(m) * c for m, c in enumerate(sin_coeffs)])
    return cos_out, sin_out
