"""Frequency-domain forward scattering on the node grid.

The total field of a point source obeys the volume integral identity

    u(x) = u_i(x) + int_Omega G(x, x') kappa(x') u(x') dx',

with G the outgoing free-space kernel exp(ik|x-x'|)/(4*pi*|x-x'|),
u_i the incident spherical wave and kappa = k^2 (c - 1) - i k eta0 sigma
the material contrast.  Discretization is midpoint collocation on the
uniform grid: off-diagonal kernel entries are G times the cell volume,
the singular self cell is integrated analytically over the volume-
equivalent ball.  The resulting dense system is never formed; the
kernel is translation invariant, so applying it is a single FFT
convolution, solved by Born iteration with a Krylov fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from .geometry import (
    DEFAULT_CONSTANTS,
    Grid3,
    MeasurementPlane,
    MediumModel,
    PhysicalConstants,
    SourceLine,
)
from .sweepio import SourceSweepData

__all__ = [
    "incident_field",
    "contrast",
    "self_cell_radius",
    "self_cell_integral",
    "KernelFFT",
    "prepare_kernel",
    "ForwardSolution",
    "solve_lippmann_schwinger",
    "evaluate_scattered",
    "synthesize_sweep",
    "add_noise",
]


def incident_field(points, source, k, derivative=False):
    """Spherical wave exp(ik r)/(4 pi r) of a point source.

    points: (..., 3); source: (3,).  With derivative=True the z-derivative
    is returned instead.  Raises if any point coincides with the source.
    """
    pts = np.asarray(points, dtype=float)
    src = np.asarray(source, dtype=float)
    diff = pts - src
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(r == 0.0):
        raise ValueError("evaluation point coincides with the source")
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    if not derivative:
        return g
    return g * (1j * k - 1.0 / r) * diff[..., 2] / r


def contrast(medium: MediumModel, k, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """kappa = k^2 (c - 1) - i k eta0 sigma on the grid (complex)."""
    return k**2 * (medium.c - 1.0) - 1j * k * constants.eta0 * medium.sigma


def self_cell_radius(h):
    """Radius of the ball with the volume of one grid cell."""
    return (3.0 * h**3 / (4.0 * np.pi)) ** (1.0 / 3.0)


def self_cell_integral(k, h):
    """Exact integral of the kernel over the volume-equivalent ball.

    int_{|y|<a} exp(ik|y|)/(4 pi |y|) dy = (exp(ika)(1 - ika) - 1)/k^2,
    which tends to a^2/2 as k -> 0.
    """
    a = self_cell_radius(h)
    ka = k * a
    if abs(ka) < 1e-3:
        # closed form cancels catastrophically near k = 0; series in (ka)
        return a * a * (0.5 + 1j * ka / 3.0 - ka * ka / 8.0 - 1j * ka**3 / 30.0)
    return (np.exp(1j * ka) * (1.0 - 1j * ka) - 1.0) / k**2


class KernelFFT:
    """Precomputed FFT of the convolution kernel for one (grid, k)."""

    def __init__(self, grid: Grid3, k):
        self.grid = grid
        self.k = float(k)
        nx, ny, nz = grid.shape
        h = grid.h
        self.pad_shape = tuple(sfft.next_fast_len(2 * n - 1) for n in (nx, ny, nz))
        # circular embedding: index i encodes offset i for i < n and
        # i - L (negative) for i > L - n; the gap in between stays zero
        offs = []
        for n, L in zip((nx, ny, nz), self.pad_shape):
            o = np.arange(L)
            o = np.where(o <= L // 2, o, o - L).astype(float)
            o[np.abs(o) >= n] = np.nan  # unused gap
            offs.append(o)
        ox, oy, oz = np.meshgrid(*offs, indexing="ij")
        r = h * np.sqrt(ox**2 + oy**2 + oz**2)
        with np.errstate(invalid="ignore", divide="ignore"):
            kern = np.exp(1j * self.k * r) / (4.0 * np.pi * r) * h**3
        kern[np.isnan(r)] = 0.0
        kern[r == 0.0] = self_cell_integral(self.k, h)
        self.kernel_hat = sfft.fftn(kern)

    def convolve(self, w):
        """Apply the volume potential to the grid field w."""
        out = sfft.ifftn(sfft.fftn(w, s=self.pad_shape) * self.kernel_hat)
        nx, ny, nz = self.grid.shape
        return out[:nx, :ny, :nz]


def prepare_kernel(grid: Grid3, k) -> KernelFFT:
    return KernelFFT(grid, k)


@dataclass
class ForwardSolution:
    """Total field on the grid plus convergence bookkeeping."""

    u: np.ndarray
    u_i: np.ndarray
    kappa: np.ndarray
    grid: Grid3
    k: float
    residual: float
    born_steps: int
    gmres_used: bool


def solve_lippmann_schwinger(
    medium: MediumModel,
    source,
    k,
    *,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    tol=1e-8,
    max_born=25,
    relax=1.0,
    kernel: KernelFFT | None = None,
    gmres_restart=50,
    gmres_maxiter=300,
) -> ForwardSolution:
    """Total field for one point source.

    Born iteration u <- u_i + A u is attempted first (A the contrast-
    weighted volume potential); as soon as its residual stalls or grows
    the current iterate seeds a restarted GMRES solve of (I - A) u = u_i.
    The residual reported is ||(I - A) u - u_i|| / ||u_i||.
    """
    grid = medium.grid
    if kernel is None:
        kernel = KernelFFT(grid, k)
    elif (
        kernel.grid.shape != grid.shape
        or kernel.grid.h != grid.h
        or kernel.k != float(k)
    ):
        raise ValueError("kernel was prepared for a different grid or wavenumber")
    kap = contrast(medium, k, constants)
    X, Y, Z = grid.meshgrid()
    pts = np.stack([X, Y, Z], axis=-1)
    u_i = incident_field(pts, source, k)

    def apply_A(u):
        return kernel.convolve(kap * u)

    norm_ui = np.linalg.norm(u_i)
    if not medium.has_contrast:
        return ForwardSolution(u_i.copy(), u_i, kap, grid, float(k), 0.0, 0, False)

    # Born series with relaxation: one kernel application per step
    u = u_i.copy()
    prev_res = np.inf
    born_steps = 0
    for _ in range(max_born):
        Au = apply_A(u)
        res = np.linalg.norm(u - u_i - Au) / norm_ui
        if res <= tol:
            return ForwardSolution(u, u_i, kap, grid, float(k), res, born_steps, False)
        if res >= 0.9 * prev_res:
            break  # contraction lost; hand over to Krylov
        prev_res = res
        u = (1.0 - relax) * u + relax * (u_i + Au)
        born_steps += 1

    shape = grid.shape
    n = grid.n_points

    def matvec(x):
        v = x.reshape(shape)
        return (v - apply_A(v)).ravel()

    op = LinearOperator((n, n), matvec=matvec, dtype=complex)
    x, info = gmres(
        op,
        u_i.ravel(),
        x0=u.ravel(),
        rtol=tol,
        restart=gmres_restart,
        maxiter=gmres_maxiter,
    )
    u = x.reshape(shape)
    res = np.linalg.norm(u - u_i - apply_A(u)) / norm_ui
    if info != 0 or res > 10.0 * tol:
        raise RuntimeError(
            f"scattering solve did not converge: gmres info={info}, "
            f"relative residual {res:.3e} (target {tol:.1e})"
        )
    return ForwardSolution(u, u_i, kap, grid, float(k), res, born_steps, True)


def evaluate_scattered(solution: ForwardSolution, points, derivative=False, chunk=256):
    """Scattered field (or its z-derivative) at points outside the grid.

    Direct summation of the volume potential over the grid, chunked
    over evaluation points.  Points closer to a node than the self-cell
    radius pick up the analytic self integral (zero for the derivative,
    by symmetry of the equivalent ball).
    """
    grid = solution.grid
    k = solution.k
    h = grid.h
    a_eq = self_cell_radius(h)
    w = (solution.kappa * solution.u).ravel()
    nodes = grid.points()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(pts.shape[0], dtype=complex)
    vol = h**3
    for lo in range(0, pts.shape[0], chunk):
        sel = pts[lo : lo + chunk]
        diff = sel[:, None, :] - nodes[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        near = r < a_eq
        r_safe = np.where(near, 1.0, r)
        g = np.exp(1j * k * r_safe) / (4.0 * np.pi * r_safe) * vol
        if derivative:
            g = g * (1j * k - 1.0 / r_safe) * diff[:, :, 2] / r_safe
            g[near] = 0.0
        else:
            g[near] = self_cell_integral(k, h)
        out[lo : lo + chunk] = g @ w
    return out


def synthesize_sweep(
    medium: MediumModel,
    sources: SourceLine,
    plane: MeasurementPlane,
    k,
    *,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    tol=1e-8,
    with_derivative=True,
    solver_kwargs=None,
):
    """Simulate the multi-source detector sweep.

    Returns (total, scattered): two sweeps on the detector plane, the
    second with the incident wave removed, both tagged stage='raw'.
    Each holds the field F0 and, when requested, its z-derivative F1.
    """
    solver_kwargs = dict(solver_kwargs or {})
    alphas = sources.alphas
    n = plane.n_detectors
    pts = plane.points()
    kernel = KernelFFT(medium.grid, k)
    f0_tot = np.empty((alphas.size, n, n), dtype=complex)
    f0_sca = np.empty_like(f0_tot)
    f1_tot = np.empty_like(f0_tot) if with_derivative else None
    f1_sca = np.empty_like(f0_tot) if with_derivative else None
    for idx, src in enumerate(sources.positions()):
        sol = solve_lippmann_schwinger(
            medium, src, k, constants=constants, tol=tol, kernel=kernel,
            **solver_kwargs,
        )
        ui = incident_field(pts, src, k).reshape(n, n)
        us = evaluate_scattered(sol, pts).reshape(n, n)
        f0_sca[idx] = us
        f0_tot[idx] = ui + us
        if with_derivative:
            ui_z = incident_field(pts, src, k, derivative=True).reshape(n, n)
            us_z = evaluate_scattered(sol, pts, derivative=True).reshape(n, n)
            f1_sca[idx] = us_z
            f1_tot[idx] = ui_z + us_z
    total = SourceSweepData(
        k=float(k), d=sources.d, alphas=alphas, plane=plane,
        stage="raw", field_kind="total", F0=f0_tot, F1=f1_tot,
    )
    scattered = SourceSweepData(
        k=float(k), d=sources.d, alphas=alphas, plane=plane,
        stage="raw", field_kind="scattered", F0=f0_sca, F1=f1_sca,
    )
    return total, scattered


def add_noise(sweep: SourceSweepData, delta, seed):
    """Multiplicative noise: every complex sample times (1 + delta*xi),
    xi drawn uniformly from [-1, 1] with a fixed seed."""
    if delta < 0:
        raise ValueError("noise level must be >= 0")
    rng = np.random.default_rng(seed)
    f0 = sweep.F0 * (1.0 + delta * rng.uniform(-1.0, 1.0, sweep.F0.shape))
    f1 = None
    if sweep.F1 is not None:
        f1 = sweep.F1 * (1.0 + delta * rng.uniform(-1.0, 1.0, sweep.F1.shape))
    return sweep.replace(F0=f0, F1=f1, noise_delta=float(delta), noise_seed=int(seed))
