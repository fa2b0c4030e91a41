"""Computational domain, grids, sources, detectors and material models.

Everything downstream works in the dimensionless convention where one
spatial unit equals 10 cm, so the wavenumber of a time-harmonic wave of
frequency f (Hz) is k = 2*pi*f / 2997924580.  The imaged box is

    Omega = (-R, R) x (-R, R) x (-b, b),

sources sit on the segment {(alpha, 0, -d) : a1 <= alpha <= a2} below the
box, and data are collected on a horizontal detector plane z = z_meas,
also below the box.  The lower face z = -b of the box is the surface the
measured data get propagated to.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PhysicalConstants",
    "DEFAULT_CONSTANTS",
    "wavenumber_from_frequency",
    "DomainBox",
    "SourceLine",
    "MeasurementPlane",
    "Grid3",
    "make_grid",
    "MediumModel",
    "homogeneous_medium",
    "add_box_inclusion",
    "save_medium",
    "load_medium",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """Fixed physical constants of the dimensionless regime.

    eta0      : impedance of free space, 377 Ohm.
    c_scaled  : speed of light expressed in (10 cm)/s, i.e. 2.99792458e9.
    """

    eta0: float = 377.0
    c_scaled: float = 2997924580.0

    def __post_init__(self):
        if self.eta0 <= 0 or self.c_scaled <= 0:
            raise ValueError("physical constants must be positive")


DEFAULT_CONSTANTS = PhysicalConstants()


def wavenumber_from_frequency(f_hz, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Dimensionless wavenumber k = 2*pi*f / c for f in Hz.

    One spatial unit is 10 cm, hence the speed of light is used in
    (10 cm)/s.  f = 4.06 GHz gives k = 8.509, f = 3.16 GHz gives 6.623.
    """
    f = float(f_hz)
    if not np.isfinite(f) or f <= 0:
        raise ValueError(f"frequency must be positive and finite, got {f_hz!r}")
    return 2.0 * np.pi * f / constants.c_scaled


@dataclass(frozen=True)
class DomainBox:
    """The rectangular box Omega = (-R,R)^2 x (-b,b).

    theta is the center offset of the exponential depth weight
    exp(2*lambda*(z-theta)^2); it must sit strictly above the top face
    so the weight decreases with depth across the whole box.
    """

    R: float = 5.0
    b: float = 2.0
    theta: float = 2.5

    def __post_init__(self):
        if self.R <= 0 or self.b <= 0:
            raise ValueError("box half-widths R, b must be positive")
        if self.theta <= self.b:
            raise ValueError(
                f"weight center theta={self.theta} must exceed b={self.b}"
            )


@dataclass(frozen=True)
class SourceLine:
    """Point sources (alpha, 0, -d) for alpha = a1, a1+step, ..., a2."""

    d: float = 9.0
    a1: float = 0.1
    a2: float = 0.6
    step: float = 0.1

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("source depth d must be positive")
        if not self.a1 < self.a2:
            raise ValueError(f"need a1 < a2, got [{self.a1}, {self.a2}]")
        if not 0 < self.step <= self.a2 - self.a1:
            raise ValueError(f"bad source step {self.step}")

    @property
    def alphas(self):
        """Source abscissas, inclusive of both endpoints."""
        n = int(round((self.a2 - self.a1) / self.step)) + 1
        return self.a1 + self.step * np.arange(n)

    def positions(self):
        """(n_src, 3) array of source locations."""
        a = self.alphas
        out = np.zeros((a.size, 3))
        out[:, 0] = a
        out[:, 2] = -self.d
        return out


@dataclass(frozen=True)
class MeasurementPlane:
    """Square detector array on the horizontal plane z = z_meas.

    n_detectors per side, cell-centered: with half_width 5 and 50
    detectors the pitch is 0.2 and positions run -4.9 ... 4.9.
    """

    z_meas: float = -14.0
    half_width: float = 5.0
    n_detectors: int = 50

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("detector half-width must be positive")
        if self.n_detectors < 2:
            raise ValueError("need at least a 2 x 2 detector array")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.n_detectors

    @property
    def axis(self):
        """Detector coordinates along one side (cell centers)."""
        s = self.spacing
        return -self.half_width + s / 2.0 + s * np.arange(self.n_detectors)

    def points(self):
        """(n^2, 3) detector positions, row-major in (ix, iy)."""
        ax = self.axis
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.empty((ax.size * ax.size, 3))
        pts[:, 0] = X.ravel()
        pts[:, 1] = Y.ravel()
        pts[:, 2] = self.z_meas
        return pts


@dataclass(frozen=True, eq=False)
class Grid3:
    """Uniform node grid on the closed box, identical spacing per axis.

    Z_h subdivisions laterally gives h = 2R/Z_h and Z_h+1 nodes per
    lateral axis; the vertical axis keeps the same h, which requires
    Z_h * b / R to be an integer.
    """

    box: DomainBox
    Z_h: int
    h0: float = 0.05
    xs: np.ndarray = field(init=False, repr=False)
    ys: np.ndarray = field(init=False, repr=False)
    zs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.Z_h < 2:
            raise ValueError("need at least 2 subdivisions per axis")
        R, b = self.box.R, self.box.b
        h = 2.0 * R / self.Z_h
        if h < self.h0:
            raise ValueError(
                f"lateral spacing h={h:.6g} below the floor h0={self.h0}"
            )
        nz_cells = 2.0 * b / h
        if abs(nz_cells - round(nz_cells)) > 1e-9:
            raise ValueError(
                f"2b/h = {nz_cells:.6g} is not an integer; pick Z_h so the "
                "vertical axis carries the same spacing"
            )
        object.__setattr__(self, "xs", np.linspace(-R, R, self.Z_h + 1))
        object.__setattr__(self, "ys", np.linspace(-R, R, self.Z_h + 1))
        object.__setattr__(self, "zs", np.linspace(-b, b, int(round(nz_cells)) + 1))
        for arr in (self.xs, self.ys, self.zs):
            arr.setflags(write=False)

    @property
    def h(self):
        return 2.0 * self.box.R / self.Z_h

    @property
    def shape(self):
        return (self.xs.size, self.ys.size, self.zs.size)

    @property
    def n_points(self):
        nx, ny, nz = self.shape
        return nx * ny * nz

    def meshgrid(self):
        """Node coordinates as three (nx, ny, nz) arrays."""
        return np.meshgrid(self.xs, self.ys, self.zs, indexing="ij")

    def points(self):
        """(n_points, 3) node coordinates in C order of (ix, iy, iz)."""
        X, Y, Z = self.meshgrid()
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def make_grid(box: DomainBox, Z_h: int, h0: float = 0.05) -> Grid3:
    """Grid with Z_h lateral subdivisions; R=5, Z_h=50 gives h=0.2."""
    return Grid3(box=box, Z_h=int(Z_h), h0=h0)


class MediumModel:
    """Dielectric constant c and conductivity sigma sampled on a grid.

    c is relative permittivity, >= 1 everywhere and == 1 on the outermost
    node shell; sigma is the dimensionless conductivity appearing in the
    wave equation (multiply by 10 for S/m), >= 0 and == 0 on the shell.
    The shell condition keeps the scattering contrast strictly inside
    the box.
    """

    def __init__(self, grid: Grid3, c, sigma):
        c = np.asarray(c, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        if c.shape != grid.shape or sigma.shape != grid.shape:
            raise ValueError(
                f"fields of shape {c.shape}/{sigma.shape} do not match the "
                f"grid shape {grid.shape}"
            )
        if np.any(c < 1.0):
            raise ValueError("dielectric constant must be >= 1 everywhere")
        if np.any(sigma < 0.0):
            raise ValueError("conductivity must be >= 0 everywhere")
        shell = _shell_mask(grid.shape)
        if np.any(c[shell] != 1.0) or np.any(sigma[shell] != 0.0):
            raise ValueError(
                "contrast must vanish on the outermost node shell "
                "(c = 1, sigma = 0 there)"
            )
        self.grid = grid
        self.c = c
        self.sigma = sigma
        self.c.setflags(write=False)
        self.sigma.setflags(write=False)

    @property
    def has_contrast(self):
        return bool(np.any(self.c != 1.0) or np.any(self.sigma != 0.0))


def _shell_mask(shape):
    m = np.zeros(shape, dtype=bool)
    m[0, :, :] = m[-1, :, :] = True
    m[:, 0, :] = m[:, -1, :] = True
    m[:, :, 0] = m[:, :, -1] = True
    return m


def homogeneous_medium(grid: Grid3) -> MediumModel:
    """Background model: c = 1, sigma = 0."""
    return MediumModel(grid, np.ones(grid.shape), np.zeros(grid.shape))


def add_box_inclusion(medium: MediumModel, center, side, c_value, sigma_value=0.0):
    """Return a new model with an axis-aligned cube buried in it.

    Nodes within side/2 of the center along every axis take the given
    values; with node-centered cells this reproduces the cube volume
    exactly when side is an even multiple of the spacing.
    """
    if c_value < 1.0 or sigma_value < 0.0:
        raise ValueError("inclusion must satisfy c >= 1, sigma >= 0")
    g = medium.grid
    cx, cy, cz = center
    half = side / 2.0 + 1e-12
    X, Y, Z = g.meshgrid()
    inside = (
        (np.abs(X - cx) <= half)
        & (np.abs(Y - cy) <= half)
        & (np.abs(Z - cz) <= half)
    )
    if not inside.any():
        raise ValueError("inclusion does not intersect the grid")
    c = medium.c.copy()
    sigma = medium.sigma.copy()
    c[inside] = c_value
    sigma[inside] = sigma_value
    return MediumModel(g, c, sigma)


def save_medium(path, medium: MediumModel):
    """Write a model to an .npz archive (bit-exact round trip)."""
    g = medium.grid
    np.savez(
        path,
        R=g.box.R,
        b=g.box.b,
        theta=g.box.theta,
        Z_h=g.Z_h,
        h0=g.h0,
        c=medium.c,
        sigma=medium.sigma,
    )


def load_medium(path) -> MediumModel:
    with np.load(path) as data:
        box = DomainBox(R=float(data["R"]), b=float(data["b"]), theta=float(data["theta"]))
        grid = Grid3(box=box, Z_h=int(data["Z_h"]), h0=float(data["h0"]))
        return MediumModel(grid, data["c"], data["sigma"])
