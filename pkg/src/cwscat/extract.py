"""Coefficient recovery from the minimizing lifted field.

Resynthesizes the log-lift v(x, alpha) at each physical source from
its basis components, then reads the medium straight off the governing
identity: since v solves

    Lap v + (grad v)^2 + 2 grad v . xt_alpha = -(k^2 (c - 1) - i k eta0 sigma)

the dielectric constant is the real part of the negated left side over
k^2 (plus the background 1) and the conductivity its imaginary part
over 0.1 k eta0, averaged over sources.  The absolute values make the
outputs respect c >= 1 and sigma >= 0 by construction; the 0.1 factor
converts the dimensionless conductivity of the model into S/m.

Post-processing isolates the target the way the imaging display does:
hard truncation at a fraction of the peak, a small box smoothing pass
(twice), and a rescale that restores the pre-smoothing peak so maxima
survive untouched.  Classification calls a target conductive when the
recovered conductivity tops 1 S/m anywhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .basis import BasisSet
from .convexify import _dx, _dxx, _dy, _dyy, _dz, _dzz
from .geometry import DEFAULT_CONSTANTS, Grid3, PhysicalConstants, SourceLine
from .lift import LiftedField, tail_vectors

__all__ = [
    "extract_coefficients",
    "postprocess",
    "classify_conductive",
    "ReconstructionResult",
    "reconstruct",
    "isosurface_centroid",
    "isosurface_bounds",
    "export_volume",
    "read_volume",
    "write_summary",
]


def extract_coefficients(
    lifted: LiftedField,
    sources: SourceLine,
    k,
    *,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
):
    """Raw (c, sigma) node grids from a minimized lifted field.

    sigma comes out in S/m.  The outermost node shell is clamped to the
    background (c = 1, sigma = 0): the difference stencils do not reach
    it and the medium model keeps that shell homogeneous anyway.
    """
    k = float(k)
    grid = lifted.grid
    basis = lifted.basis
    alphas = sources.alphas
    comps = lifted.complex_components()
    comps[..., 0] = lifted.psi0  # face plane carries the data exactly

    B = basis.evaluate(alphas)  # (N, na)
    v = np.tensordot(B, comps, axes=(0, 0))  # (na, nx, ny, nz)
    psi1 = np.tensordot(B, lifted.psi1, axes=(0, 0))  # (na, nx, ny)

    x_t, _ = tail_vectors(grid.points(), alphas, sources.d, k)
    x_t = x_t.reshape((alphas.size,) + grid.shape + (3,))

    h = grid.h
    lap = _dxx(v, h) + _dyy(v, h) + _dzz(v, h, psi1)
    gx, gy = _dx(v, h), _dy(v, h)
    gz = _dz(v, h, psi1)
    quad = gx * gx + gy * gy + gz * gz
    tail = 2.0 * (gx * x_t[..., 0] + gy * x_t[..., 1] + gz * x_t[..., 2])
    beta = -(lap + quad + tail)

    c = np.mean(np.abs(beta.real), axis=0) / k**2 + 1.0
    sigma = np.mean(np.abs(beta.imag), axis=0) / (0.1 * k * constants.eta0)

    shell = np.ones(grid.shape, dtype=bool)
    shell[1:-1, 1:-1, 1:-1] = False
    c[shell] = 1.0
    sigma[shell] = 0.0
    return c, sigma


def postprocess(raw, kappa1=0.2):
    """Display cleanup: truncate at kappa1 * peak, box-smooth, retrieve.

    The smoothing is a 3x3x3 box average applied twice; the final
    rescale multiplies by the ratio of peaks so the global maximum
    magnitude comes back exactly.  An all-zero grid passes through.
    """
    from .preprocess import truncate_field

    raw = np.asarray(raw, dtype=float)
    peak = np.max(np.abs(raw)) if raw.size else 0.0
    if peak == 0.0:
        return raw.copy()
    t = truncate_field(raw, kappa1)
    sm = uniform_filter(t, size=3, mode="nearest")
    sm = uniform_filter(sm, size=3, mode="nearest")
    rho = np.max(np.abs(t)) / np.max(np.abs(sm))
    return sm * rho


def classify_conductive(sigma_comp):
    """Conductive iff the recovered conductivity exceeds 1 S/m anywhere."""
    sigma_comp = np.asarray(sigma_comp, dtype=float)
    return bool(sigma_comp.size and np.max(sigma_comp) > 1.0)


def isosurface_centroid(values, grid: Grid3, fraction=0.1):
    """Centroid (x, y, z) of the nodes at or above fraction * max."""
    values = np.asarray(values, dtype=float)
    iso = fraction * np.max(values)
    mask = values >= iso
    if not mask.any() or np.max(values) <= 0:
        raise ValueError("no nodes reach the isovalue")
    X, Y, Z = grid.meshgrid()
    return np.array([X[mask].mean(), Y[mask].mean(), Z[mask].mean()])


def isosurface_bounds(values, grid: Grid3, fraction=0.1):
    """Axis-aligned bounding box of the isosurface set, ((lo), (hi))."""
    values = np.asarray(values, dtype=float)
    iso = fraction * np.max(values)
    mask = values >= iso
    if not mask.any() or np.max(values) <= 0:
        raise ValueError("no nodes reach the isovalue")
    X, Y, Z = grid.meshgrid()
    lo = np.array([X[mask].min(), Y[mask].min(), Z[mask].min()])
    hi = np.array([X[mask].max(), Y[mask].max(), Z[mask].max()])
    return lo, hi


@dataclass(eq=False)
class ReconstructionResult:
    """Recovered medium with both raw and display-processed grids.

    c_comp and sigma_comp are the raw extraction outputs, which satisfy
    c >= 1 and sigma >= 0 pointwise by construction; c_post/sigma_post
    carry the truncate-smooth-retrieve cleanup used for isosurface
    geometry.  The conductive flag applies the 1 S/m rule to the
    processed conductivity.
    """

    c_comp: np.ndarray
    sigma_comp: np.ndarray
    c_post: np.ndarray
    sigma_post: np.ndarray
    conductive: bool
    grid: Grid3
    k: float
    lam: float
    N: int
    iterations: int
    noise_delta: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("c_comp", "sigma_comp", "c_post", "sigma_post"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} shape {arr.shape} != grid {self.grid.shape}")
            setattr(self, name, arr)
        if np.min(self.c_comp) < 1.0 - 1e-12:
            raise ValueError("raw dielectric fell below the background 1")
        if np.min(self.sigma_comp) < -1e-12:
            raise ValueError("raw conductivity fell below 0")

    @property
    def max_c(self):
        return float(np.max(self.c_comp))

    @property
    def max_sigma(self):
        return float(np.max(self.sigma_comp))

    def isovalue(self, which="c", fraction=0.1):
        post = self.c_post if which == "c" else self.sigma_post
        return fraction * float(np.max(post))

    def centroid(self, which="c", fraction=0.1):
        post = self.c_post if which == "c" else self.sigma_post
        return isosurface_centroid(post, self.grid, fraction)

    def bounds(self, which="c", fraction=0.1):
        post = self.c_post if which == "c" else self.sigma_post
        return isosurface_bounds(post, self.grid, fraction)


def reconstruct(
    lifted: LiftedField,
    sources: SourceLine,
    k,
    *,
    lam,
    iterations=0,
    kappa1=0.2,
    noise_delta=None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    metadata=None,
) -> ReconstructionResult:
    """extract + postprocess + classify in one step."""
    c_raw, s_raw = extract_coefficients(lifted, sources, k, constants=constants)
    c_post = postprocess(c_raw, kappa1)
    s_post = postprocess(s_raw, kappa1)
    return ReconstructionResult(
        c_comp=c_raw,
        sigma_comp=s_raw,
        c_post=c_post,
        sigma_post=s_post,
        conductive=classify_conductive(s_post),
        grid=lifted.grid,
        k=float(k),
        lam=float(lam),
        N=lifted.N,
        iterations=int(iterations),
        noise_delta=noise_delta,
        metadata=dict(metadata or {}),
    )


# ---------------------------------------------------------------------------
# volume export: legacy structured-points layout, ASCII header + big-endian
# float64 payload with x varying fastest, plus an isovalue sidecar.

_VOLUME_VERSION = "# vtk DataFile Version 3.0"


def export_volume(values, grid: Grid3, path, name="scalars", iso_fraction=0.1):
    """Write a volume file and its 10%-of-max isovalue sidecar.

    Returns (volume_path, sidecar_path).  Rejects empty or non-finite
    grids; the sidecar records fraction * max for viewers.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("refusing to export an empty grid")
    if values.shape != grid.shape:
        raise ValueError(f"values shape {values.shape} != grid {grid.shape}")
    if not np.isfinite(values).all():
        raise ValueError("volume contains non-finite entries")
    nx, ny, nz = values.shape
    header = "\n".join(
        [
            _VOLUME_VERSION,
            name,
            "BINARY",
            "DATASET STRUCTURED_POINTS",
            f"DIMENSIONS {nx} {ny} {nz}",
            f"ORIGIN {grid.xs[0]:.17g} {grid.ys[0]:.17g} {grid.zs[0]:.17g}",
            f"SPACING {grid.h:.17g} {grid.h:.17g} {grid.h:.17g}",
            f"POINT_DATA {values.size}",
            f"SCALARS {name} double",
            "LOOKUP_TABLE default",
            "",
        ]
    )
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(values.ravel(order="F").astype(">f8").tobytes())
    sidecar = path + ".isovalue.txt"
    with open(sidecar, "w") as fh:
        fh.write(f"{iso_fraction * float(np.max(values)):.17g}\n")
    return path, sidecar


def read_volume(path):
    """Inverse of export_volume; returns (values, origin, spacing)."""
    with open(str(path), "rb") as fh:
        blob = fh.read()
    head, _, rest = blob.partition(b"LOOKUP_TABLE default\n")
    if not rest and not head.endswith(b"LOOKUP_TABLE default\n"):
        raise ValueError("not a structured-points volume file")
    fields = {}
    for line in head.decode("ascii").splitlines():
        parts = line.split()
        if parts and parts[0] in ("DIMENSIONS", "ORIGIN", "SPACING", "POINT_DATA"):
            fields[parts[0]] = parts[1:]
    nx, ny, nz = (int(s) for s in fields["DIMENSIONS"])
    n = int(fields["POINT_DATA"][0])
    if n != nx * ny * nz:
        raise ValueError("point count does not match dimensions")
    if len(rest) < 8 * n:
        raise ValueError("volume payload truncated")
    flat = np.frombuffer(rest[: 8 * n], dtype=">f8").astype(float)
    values = flat.reshape((nx, ny, nz), order="F")
    origin = np.array([float(s) for s in fields["ORIGIN"]])
    spacing = np.array([float(s) for s in fields["SPACING"]])
    return values, origin, spacing


def write_summary(result: ReconstructionResult, text_path, csv_path=None):
    """Run report: peak values, conductive flag, isosurface extent."""
    lo, hi = result.bounds("c")
    lines = [
        f"max c_comp       : {result.max_c:.6g}",
        f"max sigma_comp   : {result.max_sigma:.6g} S/m",
        f"conductive       : {'yes' if result.conductive else 'no'}",
        f"c isovalue (10%) : {result.isovalue('c'):.6g}",
        "isosurface box   : "
        f"[{lo[0]:.3g}, {hi[0]:.3g}] x [{lo[1]:.3g}, {hi[1]:.3g}] "
        f"x [{lo[2]:.3g}, {hi[2]:.3g}]",
        f"wavenumber k     : {result.k:.6g}",
        f"lambda           : {result.lam:.6g}",
        f"basis size N     : {result.N}",
        f"iterations       : {result.iterations}",
    ]
    if result.noise_delta is not None:
        lines.append(f"noise delta      : {result.noise_delta:.6g}")
    with open(str(text_path), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if csv_path is not None:
        with open(str(csv_path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                [
                    "max_c",
                    "max_sigma",
                    "conductive",
                    "isovalue_c",
                    "box_lo_x",
                    "box_lo_y",
                    "box_lo_z",
                    "box_hi_x",
                    "box_hi_y",
                    "box_hi_z",
                    "k",
                    "lambda",
                    "N",
                    "iterations",
                ]
            )
            w.writerow(
                [
                    f"{result.max_c:.17g}",
                    f"{result.max_sigma:.17g}",
                    int(result.conductive),
                    f"{result.isovalue('c'):.17g}",
                    *[f"{v:.17g}" for v in lo],
                    *[f"{v:.17g}" for v in hi],
                    f"{result.k:.17g}",
                    f"{result.lam:.17g}",
                    result.N,
                    result.iterations,
                ]
            )
    return str(text_path)
