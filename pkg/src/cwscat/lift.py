"""Logarithmic lift of the measured fields and its basis expansion.

Dividing the total field by the incident wave and taking the complex
logarithm, v = log(u / u_i), removes the source singularity and turns
the wave equation into a quadratic first-order identity for v whose
coefficient contrast appears linearly.  Differentiating that identity
along the source abscissa alpha kills the unknown coefficient entirely;
what remains couples grad v to two explicit vector fields

    x_tilde = grad log u_i = ik (x - x_a)/|x - x_a| - (x - x_a)/|x - x_a|^2
    x_hat   = d/d(alpha) x_tilde,

both known in closed form for point sources on the line (alpha, 0, -d).
Expanding v(x, .) over the orthonormal exponential-polynomial basis in
alpha converts the differentiated identity into the coupled elliptic
system solved by the weighted minimization.

The complex log needs a branch choice: the phase is unwrapped in 2-D,
row then columns, anchored at the strongest sample, so the lift of
smooth data is smooth.  Samples whose magnitude falls below a relative
floor are filled from their nearest valid neighbor and counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import distance_transform_edt

from .basis import BasisSet
from .geometry import Grid3, SourceLine
from .sweepio import SourceSweepData

__all__ = [
    "tail_vectors",
    "log_ratio",
    "project_fourier",
    "LiftedField",
    "starting_point",
    "CauchyData",
    "cauchy_data",
    "write_lifted",
    "read_lifted",
]


def tail_vectors(points, alphas, d, k):
    """The vector fields x_tilde and x_hat at points for each alpha.

    points: (npts, 3); alphas: (na,).  Returns two complex arrays of
    shape (na, npts, 3).  x_tilde is the gradient of log u_i for the
    source at (alpha, 0, -d); x_hat is its alpha-derivative.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    wx = pts[None, :, 0] - alphas[:, None]  # (na, npts)
    wy = pts[None, :, 1] + np.zeros_like(alphas)[:, None]
    wz = pts[None, :, 2] + d + np.zeros_like(alphas)[:, None]
    r2 = wx**2 + wy**2 + wz**2
    if np.any(r2 == 0.0):
        raise ValueError("evaluation point coincides with a source")
    r = np.sqrt(r2)
    w = np.stack([wx, wy, wz], axis=-1)  # (na, npts, 3)
    x_tilde = (1j * k / r - 1.0 / r2)[..., None] * w

    # alpha-derivative, first of w/r, then of w/r^2:
    #   d/da (w/r)   = ( (wx^2 - r^2, wx wy, wx wz) ) / r^3
    #   d/da (w/r^2) = ( (2 wx^2 - r^2, 2 wx wy, 2 wx wz) ) / r^4
    first = np.stack([wx * wx - r2, wx * wy, wx * wz], axis=-1)
    second = np.stack([2 * wx * wx - r2, 2 * wx * wy, 2 * wx * wz], axis=-1)
    x_hat = (1j * k / r**3)[..., None] * first - (1.0 / r2**2)[..., None] * second
    return x_tilde, x_hat


def _unwrap_2d(phase, anchor):
    """Row/column unwrap of a wrapped phase grid starting at anchor."""
    i0, j0 = anchor
    out = phase.copy()
    # anchor row, outwards both ways
    out[i0, j0:] = np.unwrap(out[i0, j0:])
    out[i0, : j0 + 1] = np.unwrap(out[i0, : j0 + 1][::-1])[::-1]
    # every column, outwards from the anchor row
    if i0 < out.shape[0] - 1:
        down = np.unwrap(out[i0:, :], axis=0)
        out[i0:, :] = down
    if i0 > 0:
        up = np.unwrap(out[: i0 + 1, :][::-1], axis=0)[::-1]
        out[: i0 + 1, :] = up
    return out


def log_ratio(u, u_i, floor=1e-14):
    """v = log(u / u_i) with a continuous branch; returns (v, n_filled).

    The phase of u/u_i is unwrapped in 2-D anchored at the largest |u|
    sample, which carries the principal branch.  Samples with
    |u| < floor * max|u| cannot support a log; they are replaced by
    their nearest valid neighbor's value and counted in n_filled.
    """
    u = np.asarray(u, dtype=complex)
    u_i = np.asarray(u_i, dtype=complex)
    if u.shape != u_i.shape or u.ndim != 2:
        raise ValueError("u and u_i must be 2-D grids of equal shape")
    if np.any(u_i == 0.0):
        raise ValueError("incident field vanishes on the grid")
    mag = np.abs(u)
    peak = mag.max()
    if peak == 0.0:
        raise ValueError("field is identically zero; nothing to lift")
    bad = mag < floor * peak
    ratio = np.where(bad, 1.0 + 0.0j, u / u_i)
    anchor = np.unravel_index(np.argmax(mag), mag.shape)
    phase = _unwrap_2d(np.angle(ratio), anchor)
    v = np.log(np.abs(ratio)) + 1j * phase
    n_filled = int(bad.sum())
    if n_filled:
        _, (ii, jj) = distance_transform_edt(bad, return_indices=True)
        v = v.copy()
        v[bad] = v[ii[bad], jj[bad]]
    return v, n_filled


def project_fourier(samples, alphas, basis: BasisSet):
    """Basis coefficients of alpha-sampled data.

    samples has the source axis first: (n_src, ...).  Values are
    linearly interpolated from the discrete source positions onto the
    quadrature nodes of the basis, then integrated against each Psi_n.
    Returns an array of shape (N, ...).
    """
    samples = np.asarray(samples)
    alphas = np.asarray(alphas, dtype=float)
    if samples.shape[0] != alphas.size:
        raise ValueError("leading axis of samples must match the source count")
    if alphas.size < 2:
        raise ValueError("need at least two source positions to interpolate")
    if np.any(np.diff(alphas) <= 0):
        raise ValueError("source positions must be strictly increasing")
    eps = 1e-12
    if alphas[0] > basis.a1 + eps or alphas[-1] < basis.a2 - eps:
        raise ValueError(
            f"sources cover [{alphas[0]}, {alphas[-1]}] but the basis lives "
            f"on [{basis.a1}, {basis.a2}]"
        )
    # linear interpolation matrix from source positions to the nodes
    nodes = basis.nodes
    idx = np.clip(np.searchsorted(alphas, nodes) - 1, 0, alphas.size - 2)
    t = (nodes - alphas[idx]) / (alphas[idx + 1] - alphas[idx])
    W = np.zeros((nodes.size, alphas.size))
    rows = np.arange(nodes.size)
    W[rows, idx] = 1.0 - t
    W[rows, idx + 1] = t
    at_nodes = np.tensordot(W, samples, axes=(1, 0))  # (nq, ...)
    weighted = basis.evaluate(basis.nodes) * basis.weights  # (N, nq)
    return np.tensordot(weighted, at_nodes, axes=(1, 0))


@dataclass(eq=False)
class LiftedField:
    """Truncated basis expansion of the lift on the 3-D grid.

    values stores the 2N real component volumes (Re v_0, Im v_0,
    Re v_1, ...), shape (2N, nx, ny, nz).  psi0 and psi1 are the
    Dirichlet and Neumann traces of the components on the face z = -b,
    complex, shape (N, nx, ny).
    """

    values: np.ndarray
    psi0: np.ndarray
    psi1: np.ndarray
    grid: Grid3
    basis: BasisSet

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.psi0 = np.asarray(self.psi0, dtype=complex)
        self.psi1 = np.asarray(self.psi1, dtype=complex)
        N = self.basis.N
        nx, ny, nz = self.grid.shape
        if self.values.shape != (2 * N, nx, ny, nz):
            raise ValueError(
                f"values shape {self.values.shape} != {(2 * N, nx, ny, nz)}"
            )
        if self.psi0.shape != (N, nx, ny) or self.psi1.shape != (N, nx, ny):
            raise ValueError("boundary traces must be (N, nx, ny) complex grids")

    @property
    def N(self):
        return self.basis.N

    def complex_components(self):
        """(N, nx, ny, nz) complex view of the component volumes."""
        return self.values[0::2] + 1j * self.values[1::2]

    def with_components(self, comps):
        """Copy of self with new complex components."""
        vals = np.empty_like(self.values)
        vals[0::2] = comps.real
        vals[1::2] = comps.imag
        return LiftedField(vals, self.psi0, self.psi1, self.grid, self.basis)


def depth_cutoff(zs, b):
    """The C^2 cutoff: 1 at z = -b, 0 for z >= 0, smooth in between."""
    zs = np.asarray(zs, dtype=float)
    out = np.zeros_like(zs)
    neg = zs < 0.0
    zb = zs[neg] + b
    with np.errstate(divide="ignore", over="ignore"):
        out[neg] = np.exp(2.0 * zb**2 / (zb**2 - b**2))
    return out


def starting_point(psi0, psi1, grid: Grid3, basis: BasisSet) -> LiftedField:
    """First iterate built from the Cauchy data alone.

    v0_n(x, y, z) = (psi0_n(x, y) + psi1_n(x, y) (z + b)) * chi(z) with
    the depth cutoff chi; both traces are reproduced at z = -b because
    chi(-b) = 1 and chi'(-b) = 0.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    psi1 = np.asarray(psi1, dtype=complex)
    b = grid.box.b
    zs = grid.zs
    chi = depth_cutoff(zs, b)
    ramp = (zs + b) * chi
    comps = psi0[..., None] * chi + psi1[..., None] * ramp
    vals = np.empty((2 * basis.N,) + grid.shape)
    vals[0::2] = comps.real
    vals[1::2] = comps.imag
    return LiftedField(vals, psi0, psi1, grid, basis)


@dataclass(eq=False)
class CauchyData:
    """Boundary payload extracted from a preprocessed sweep."""

    psi0: np.ndarray
    psi1: np.ndarray
    n_filled: int


def _resample_to_nodes(plane_grid, plane, grid: Grid3):
    """Bilinear detector-raster -> node-grid resampling on the face."""
    interp = RegularGridInterpolator(
        (plane.axis, plane.axis),
        plane_grid,
        method="linear",
        bounds_error=False,
        fill_value=0.0,
    )
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    return interp(pts).reshape(X.shape)


def cauchy_data(
    sweep: SourceSweepData,
    grid: Grid3,
    sources: SourceLine,
    basis: BasisSet,
    floor=1e-14,
) -> CauchyData:
    """Dirichlet and Neumann coefficient traces from preprocessed data.

    The sweep must be background-subtracted and already continued to
    the face z = -b (its F1 block holding the z-derivative).  For each
    source the total field is reassembled by adding the incident wave
    at the face nodes, lifted, and the lift's z-derivative formed as
    u_z / u - dz log u_i; both are then projected onto the basis.
    """
    from .forward import incident_field

    if sweep.field_kind != "scattered":
        raise ValueError("cauchy_data expects background-subtracted data")
    if sweep.F1 is None:
        raise ValueError("sweep carries no z-derivative block")
    b = grid.box.b
    if abs(sweep.plane.z_meas + b) > 1e-9:
        raise ValueError(
            f"sweep lives on z = {sweep.plane.z_meas}, expected the box face "
            f"z = {-b}"
        )
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    face = np.stack([X, Y, np.full_like(X, -b)], axis=-1)
    n_src = sweep.n_sources
    v = np.empty((n_src,) + X.shape, dtype=complex)
    vz = np.empty_like(v)
    filled = 0
    for s, alpha in enumerate(sweep.alphas):
        src = np.array([alpha, 0.0, -sources.d])
        ui = incident_field(face, src, sweep.k)
        ui_z = incident_field(face, src, sweep.k, derivative=True)
        us = _resample_to_nodes(sweep.F0[s], sweep.plane, grid)
        us_z = _resample_to_nodes(sweep.F1[s], sweep.plane, grid)
        u = ui + us
        u_z = ui_z + us_z
        v[s], nf = log_ratio(u, ui, floor=floor)
        filled += nf
        vz[s] = u_z / u - ui_z / ui
    psi0 = project_fourier(v, sweep.alphas, basis)
    psi1 = project_fourier(vz, sweep.alphas, basis)
    return CauchyData(psi0=psi0, psi1=psi1, n_filled=filled)


# ---------------------------------------------------------------------------
# file format: text header, then 2N volumes and the two trace blocks

MAGIC = b"CWLIFT 1\n"


def write_lifted(path, lf: LiftedField):
    """Header (N, grid, box, basis interval) + 2N row-major float64
    volumes, then psi0 and psi1 as complex plane grids."""
    import json

    hdr = {
        "N": lf.N,
        "grid": {"Z_h": lf.grid.Z_h, "h0": lf.grid.h0},
        "box": {"R": lf.grid.box.R, "b": lf.grid.box.b, "theta": lf.grid.box.theta},
        "basis": {
            "a1": lf.basis.a1,
            "a2": lf.basis.a2,
            "quad_order": lf.basis.quad_order,
        },
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(hdr, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(lf.values).astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(lf.psi0).astype("<c16").tobytes())
        fh.write(np.ascontiguousarray(lf.psi1).astype("<c16").tobytes())


def read_lifted(path) -> LiftedField:
    import json

    from .basis import build_basis
    from .geometry import DomainBox

    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise ValueError(f"{path}: not a lifted-field file")
        hdr = json.loads(fh.readline().decode())
        payload = fh.read()
    box = DomainBox(**hdr["box"])
    grid = Grid3(box=box, Z_h=hdr["grid"]["Z_h"], h0=hdr["grid"]["h0"])
    N = hdr["N"]
    basis = build_basis(
        hdr["basis"]["a1"], hdr["basis"]["a2"], N, hdr["basis"]["quad_order"]
    )
    nx, ny, nz = grid.shape
    nvol = 2 * N * nx * ny * nz
    nplane = N * nx * ny
    want = nvol * 8 + 2 * nplane * 16
    if len(payload) != want:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {want}")
    vals = np.frombuffer(payload[: nvol * 8], dtype="<f8").reshape(2 * N, nx, ny, nz)
    rest = payload[nvol * 8 :]
    psi0 = np.frombuffer(rest[: nplane * 16], dtype="<c16").reshape(N, nx, ny)
    psi1 = np.frombuffer(rest[nplane * 16 :], dtype="<c16").reshape(N, nx, ny)
    return LiftedField(vals.copy(), psi0.copy(), psi1.copy(), grid, basis)
