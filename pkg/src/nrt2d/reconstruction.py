"""Indicator sweeps over disk families, classification, and intersection masks.

A finite multi-radius disk family stands in for the full class of test
domains; the rasterized intersection of the accepted (no-response) disks is an
outer approximation of the cavity closure, roughly a morphological closing at
the smallest accepted radius.
"""

from __future__ import annotations

import base64
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import GeometryError, make_test_domain, winding_numbers
from .indicator import DEFAULT_TRUNCATION, gram_matrix, indicator_value, response_vector
from .probes import build_basis

LOG_FLOOR = 1e-300

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepConfig:
    """Disk-family sweep: an nx-by-ny center grid times a list of radii."""

    nx: int = 16
    ny: int = 16
    radii: tuple = (0.3, 0.4, 0.5)
    basis: dict = field(default_factory=dict)
    truncation: float = DEFAULT_TRUNCATION
    clearance: float = None
    radial_order: int = 16
    angular_order: int = 64

    def validate(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("sweep grid must be at least 1x1")
        radii = tuple(float(r) for r in self.radii)
        if len(radii) == 0 or any(r <= 0 for r in radii):
            raise ValueError("radius list must be nonempty and positive")
        if any(b >= a for a, b in zip(radii[1:], radii)):
            raise ValueError("radius list must be strictly increasing")
        if not 0 < self.truncation < 1:
            raise ValueError("truncation must lie in (0, 1)")
        return self


def sweep_centers(cfg, outer):
    """Deterministic center grid over the outer bounding box shrunk by clearance."""
    from .geometry import default_clearance

    clear = cfg.clearance if cfg.clearance is not None else default_clearance(outer)
    lo = outer.points.min(axis=0) + clear
    hi = outer.points.max(axis=0) - clear
    xs = np.linspace(lo[0], hi[0], cfg.nx)
    ys = np.linspace(lo[1], hi[1], cfg.ny)
    return xs, ys, clear


def sweep(trace, cfg, outer, basis=None, jobs=1):
    """Indicator for every admissible (center, radius) disk in the family.

    Inadmissible pairs (disk closure not inside the outer curve with margin)
    are skipped and logged.  Results come back in deterministic grid order
    regardless of the number of worker threads.
    """
    cfg.validate()
    if basis is None:
        basis = build_basis(outer, **cfg.basis)
    r = response_vector(trace, basis, outer)
    xs, ys, clear = sweep_centers(cfg, outer)

    domains = []
    skipped = 0
    for iy, cy in enumerate(ys):
        for ix, cx in enumerate(xs):
            for ir, rho in enumerate(cfg.radii):
                try:
                    dom = make_test_domain(
                        (cx, cy), rho, domain_id=f"g{ix:02d}_{iy:02d}_r{ir}",
                        outer=outer, clearance=clear,
                        radial_order=cfg.radial_order,
                        angular_order=cfg.angular_order,
                    )
                except GeometryError:
                    skipped += 1
                    continue
                domains.append(dom)
    if skipped:
        logger.info("sweep skipped %d inadmissible (center, radius) pairs", skipped)
    if not domains:
        raise ValueError(
            "no admissible test domains: every disk in the family leaves the "
            "outer boundary margin"
        )

    def score(dom):
        m = gram_matrix(basis, dom)
        return indicator_value(
            r, m, truncation=cfg.truncation, domain_id=dom.domain_id,
            center=dom.center, radius=dom.radius,
        )

    if jobs is not None and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(score, domains))
    else:
        results = [score(dom) for dom in domains]
    return results


@dataclass(frozen=True)
class Classification:
    accepted: tuple
    method: str
    split_value: float = float("nan")  # log10 threshold separating the groups
    gap: float = 0.0
    warning: str = ""


def classify(results, method="largest-gap", threshold=None):
    """Split indicator results into accepted (no-response) and rejected domains.

    largest-gap sorts log10(I + floor) and splits at the widest consecutive
    gap, accepting the lower group.  When all values sit within one decade the
    split is meaningless: a warning is recorded and the classifier falls back
    to the fixed threshold (accepting everything if none was given).
    """
    if method not in ("largest-gap", "fixed-threshold"):
        raise ValueError(f"unknown classification method {method!r}")
    if method == "fixed-threshold":
        if threshold is None:
            raise ValueError("fixed-threshold classification needs a threshold")
        acc = tuple(res.domain_id for res in results if res.value <= threshold)
        return Classification(accepted=acc, method="fixed-threshold",
                              split_value=np.log10(threshold + LOG_FLOOR))
    if len(results) < 2:
        raise ValueError("largest-gap classification needs at least 2 results")
    logs = np.log10(np.array([res.value for res in results]) + LOG_FLOOR)
    order = np.argsort(logs)
    sorted_logs = logs[order]
    if sorted_logs[-1] - sorted_logs[0] < 1.0:
        warning = (
            "degenerate indicator spread (all values within one decade); "
            "falling back to fixed threshold"
        )
        logger.warning(warning)
        if threshold is not None:
            acc = tuple(res.domain_id for res in results if res.value <= threshold)
            split = np.log10(threshold + LOG_FLOOR)
        else:
            acc = tuple(res.domain_id for res in results)
            split = float(sorted_logs[-1])
        return Classification(accepted=acc, method="fallback-fixed-threshold",
                              split_value=split, warning=warning)
    gaps = np.diff(sorted_logs)
    cut = int(np.argmax(gaps))
    split = 0.5 * (sorted_logs[cut] + sorted_logs[cut + 1])
    acc = tuple(res.domain_id for res in results if np.log10(res.value + LOG_FLOOR) <= split)
    return Classification(accepted=acc, method="largest-gap",
                          split_value=float(split), gap=float(gaps[cut]))


# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ReconstructionMask:
    """Rasterized intersection of accepted disk closures, clipped to Omega.

    pixels[iy, ix] covers the cell centered at
    (xmin + (ix + 1/2) dx, ymin + (iy + 1/2) dy); rows run with increasing y.
    """

    bbox: tuple  # (xmin, xmax, ymin, ymax)
    resolution: tuple  # (nx, ny)
    pixels: np.ndarray = field(repr=False)
    accepted: tuple = ()
    threshold: dict = field(default_factory=dict)

    @property
    def pixel_area(self):
        xmin, xmax, ymin, ymax = self.bbox
        nx, ny = self.resolution
        return (xmax - xmin) / nx * (ymax - ymin) / ny

    def pixel_centers(self):
        xmin, xmax, ymin, ymax = self.bbox
        nx, ny = self.resolution
        xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
        ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
        gx, gy = np.meshgrid(xs, ys)  # shape (ny, nx)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def area(self):
        return float(self.pixels.sum()) * self.pixel_area

    def boundary_points(self):
        """Centers of mask pixels with at least one unset 4-neighbor."""
        m = self.pixels
        padded = np.pad(m, 1, constant_values=False)
        interior = (
            padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
        )
        edge = m & ~interior
        centers = self.pixel_centers().reshape(m.shape + (2,))
        return centers[edge]

    def to_json(self):
        packed = np.packbits(self.pixels.astype(np.uint8).ravel())
        return {
            "bbox": [float(v) for v in self.bbox],
            "resolution": [int(v) for v in self.resolution],
            "pixels": base64.b64encode(packed.tobytes()).decode("ascii"),
            "accepted": list(self.accepted),
            "threshold": dict(self.threshold),
        }

    @staticmethod
    def from_json(rec):
        nx, ny = (int(v) for v in rec["resolution"])
        raw = np.frombuffer(base64.b64decode(rec["pixels"]), dtype=np.uint8)
        bits = np.unpackbits(raw)[: nx * ny].astype(bool).reshape(ny, nx)
        return ReconstructionMask(
            bbox=tuple(float(v) for v in rec["bbox"]),
            resolution=(nx, ny), pixels=bits,
            accepted=tuple(rec.get("accepted", ())),
            threshold=dict(rec.get("threshold", {})),
        )


def intersect_mask(accepted_domains, resolution, outer, threshold_info=None):
    """Pixel-wise intersection of accepted disk closures, restricted to Omega."""
    domains = list(accepted_domains)
    if not domains:
        raise ValueError(
            "empty accepted set: no domain was classified as no-response; "
            "enlarge the radius list or relax the threshold"
        )
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    nx, ny = resolution
    lo = outer.points.min(axis=0)
    hi = outer.points.max(axis=0)
    xmin, xmax, ymin, ymax = lo[0], hi[0], lo[1], hi[1]
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    gx, gy = np.meshgrid(xs, ys)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = winding_numbers(outer, centers) == 1
    for dom in domains:
        c = np.asarray(dom.center, dtype=float)
        rho = float(dom.radius)
        d2 = ((centers - c) ** 2).sum(-1)
        inside &= d2 <= rho**2 * (1 + 1e-12)
    return ReconstructionMask(
        bbox=(xmin, xmax, ymin, ymax), resolution=(nx, ny),
        pixels=inside.reshape(ny, nx),
        accepted=tuple(d.domain_id if hasattr(d, "domain_id") else str(d) for d in domains),
        threshold=dict(threshold_info or {}),
    )


def rasterize_curve(curve, mask):
    """Truth raster of a closed curve on the mask's pixel grid."""
    centers = mask.pixel_centers()
    inside = winding_numbers(curve, centers) == 1
    return inside.reshape(mask.pixels.shape)


def metrics(mask, truth):
    """Jaccard index, symmetric Hausdorff distance, and area ratio vs truth."""
    truth_pix = rasterize_curve(truth, mask)
    m = mask.pixels
    inter = int(np.sum(m & truth_pix))
    union = int(np.sum(m | truth_pix))
    out = {"jaccard": inter / union if union else 0.0}
    if not m.any():
        out.update({"hausdorff": float("inf"),
                    "area_ratio": 0.0, "empty_mask": True})
        return out
    boundary = mask.boundary_points()
    curve_pts = truth.points
    d1 = cKDTree(curve_pts).query(boundary)[0].max()
    d2 = cKDTree(boundary).query(curve_pts)[0].max()
    out["hausdorff"] = float(max(d1, d2))
    truth_count = int(truth_pix.sum())
    out["area_ratio"] = float(m.sum() / truth_count) if truth_count else float("inf")
    return out
