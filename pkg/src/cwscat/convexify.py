"""Globally convex weighted least-squares solve of the lifted system.

The basis components V = (v_0 ... v_{N-1}) of the lift satisfy a coupled
elliptic system

    Lap V + K(grad V) = 0

in the box, with Cauchy data (V, dV/dz) = (psi0, psi1) known on the face
z = -b and homogeneous Neumann conditions elsewhere.  K collects the
quadratic gradient coupling and the two explicit source-derivative
vector fields; it contains no second derivatives and no unknown
coefficients, which is what makes a least-squares attack meaningful.

The functional minimized is the residual of that system weighted by
exp(2 lambda (z - theta)^2), theta above the box: the weight is largest
exactly on the data face and decays with depth, which both anchors the
iterate to the measurements and (for lambda large enough) makes the
functional strictly convex on bounded sets, so plain gradient descent
from the data-driven starting guess converges without a good first
approximation.  Internally the weight is normalized by its peak so
lambda of a few tens stays inside floating-point range.

Discretely: second-order central differences in x and y on the interior
columns, central differences in z with ghost planes that hard-wire the
Neumann data at z = -b and a mirror at z = +b, trapezoid quadrature in
z.  The descent direction is the exact algebraic gradient of the
discrete functional (the stencil adjoints are applied transposed, never
re-derived approximately), so finite differences of J reproduce it to
rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet, pair_tensors
from .geometry import Grid3, SourceLine
from .lift import LiftedField, tail_vectors

__all__ = [
    "CarlemanWeight",
    "cwf",
    "InversionSystem",
    "build_system",
    "nonlinearity_K",
    "operator_Lh",
    "cost_and_gradient",
    "CostEvaluation",
    "h2_norm",
    "BallConstraint",
    "project_ball",
    "DescentSchedule",
    "MinimizeResult",
    "minimize",
    "write_iteration_log",
]


def cwf(z, lam, theta):
    """The depth weight exp(2 lambda (z - theta)^2), unnormalized."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return np.exp(2.0 * lam * (np.asarray(z, dtype=float) - theta) ** 2)


@dataclass(frozen=True)
class CarlemanWeight:
    """Weight exp(2 lambda (z - theta)^2) on [-b, b], theta > b.

    Decreasing across the box, peaking on the data face z = -b.  The
    normalized form divides by the peak so large lambda stays finite.
    """

    lam: float
    theta: float
    b: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.theta <= self.b:
            raise ValueError("theta must exceed b")

    def normalized(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(
            2.0 * self.lam * ((z - self.theta) ** 2 - (self.b + self.theta) ** 2)
        )

    def peak(self):
        """mu at z = -b; overflows to inf for large lambda, by design."""
        with np.errstate(over="ignore"):
            return float(np.exp(2.0 * self.lam * (self.b + self.theta) ** 2))


# ---------------------------------------------------------------------------
# difference stencils and their exact transposes
#
# All act on arrays (..., nx, ny, nz).  Forward stencils fill only rows
# they define; everything else is zero.  Transposes scatter with the
# same coefficients, so <A f, g> = <f, A^T g> holds to rounding for any
# arrays, which is what makes the cost gradient exact.


def _dxx(F, h):
    out = np.zeros_like(F)
    out[..., 1:-1, :, :] = (
        F[..., 2:, :, :] - 2.0 * F[..., 1:-1, :, :] + F[..., :-2, :, :]
    ) / h**2
    return out


def _dxx_T(R, h):
    out = np.zeros_like(R)
    r = R[..., 1:-1, :, :] / h**2
    out[..., 2:, :, :] += r
    out[..., 1:-1, :, :] -= 2.0 * r
    out[..., :-2, :, :] += r
    return out


def _dyy(F, h):
    out = np.zeros_like(F)
    out[..., :, 1:-1, :] = (
        F[..., :, 2:, :] - 2.0 * F[..., :, 1:-1, :] + F[..., :, :-2, :]
    ) / h**2
    return out


def _dyy_T(R, h):
    out = np.zeros_like(R)
    r = R[..., :, 1:-1, :] / h**2
    out[..., :, 2:, :] += r
    out[..., :, 1:-1, :] -= 2.0 * r
    out[..., :, :-2, :] += r
    return out


def _dzz(F, dz, psi1):
    """Vertical second difference with data and mirror ghosts.

    At z = -b the ghost plane F[-1] = F[1] - 2 dz psi1 carries the
    Neumann data; at z = +b the mirror F[nz] = F[nz-2] enforces a zero
    normal derivative.
    """
    out = np.zeros_like(F)
    out[..., 1:-1] = (F[..., 2:] - 2.0 * F[..., 1:-1] + F[..., :-2]) / dz**2
    out[..., 0] = 2.0 * (F[..., 1] - F[..., 0]) / dz**2 - 2.0 * psi1 / dz
    out[..., -1] = 2.0 * (F[..., -2] - F[..., -1]) / dz**2
    return out


def _dzz_T(R, dz):
    out = np.zeros_like(R)
    r = R[..., 1:-1] / dz**2
    out[..., 2:] += r
    out[..., 1:-1] -= 2.0 * r
    out[..., :-2] += r
    out[..., 1] += 2.0 * R[..., 0] / dz**2
    out[..., 0] -= 2.0 * R[..., 0] / dz**2
    out[..., -2] += 2.0 * R[..., -1] / dz**2
    out[..., -1] -= 2.0 * R[..., -1] / dz**2
    return out


def _dx(F, h):
    out = np.zeros_like(F)
    out[..., 1:-1, :, :] = (F[..., 2:, :, :] - F[..., :-2, :, :]) / (2.0 * h)
    return out


def _dx_T(R, h):
    out = np.zeros_like(R)
    r = R[..., 1:-1, :, :] / (2.0 * h)
    out[..., 2:, :, :] += r
    out[..., :-2, :, :] -= r
    return out


def _dy(F, h):
    out = np.zeros_like(F)
    out[..., :, 1:-1, :] = (F[..., :, 2:, :] - F[..., :, :-2, :]) / (2.0 * h)
    return out


def _dy_T(R, h):
    out = np.zeros_like(R)
    r = R[..., :, 1:-1, :] / (2.0 * h)
    out[..., :, 2:, :] += r
    out[..., :, :-2, :] -= r
    return out


def _dz(F, dz, psi1):
    """Vertical first difference; the same ghosts make the face rows
    carry the Neumann data exactly (psi1 at z=-b, zero at z=+b)."""
    out = np.zeros_like(F)
    out[..., 1:-1] = (F[..., 2:] - F[..., :-2]) / (2.0 * dz)
    out[..., 0] = psi1
    out[..., -1] = 0.0
    return out


def _dz_T(R, dz):
    out = np.zeros_like(R)
    r = R[..., 1:-1] / (2.0 * dz)
    out[..., 2:] += r
    out[..., :-2] -= r
    return out


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class InversionSystem:
    """Everything fixed during a minimization run.

    Bundles the grid, basis algebra, boundary payload, the combined
    source-coupling tensor, and the weight field.  Fields of the
    2N-component iterate are plain real arrays (2N, nx, ny, nz); the
    face plane z = -b is not a degree of freedom (it is overwritten
    with psi0 on every evaluation and the gradient vanishes there).
    """

    grid: Grid3
    basis: BasisSet
    k: float
    weight: CarlemanWeight
    psi0: np.ndarray
    psi1: np.ndarray
    p_tilde: np.ndarray = field(repr=False)
    p_hat: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)

    @property
    def N(self):
        return self.basis.N

    @property
    def p_total(self):
        return self.p_tilde + self.p_hat


def build_system(
    lifted: LiftedField,
    sources: SourceLine,
    k,
    lam,
    *,
    theta=None,
) -> InversionSystem:
    """Assemble the fixed data of the weighted least-squares problem."""
    grid = lifted.grid
    basis = lifted.basis
    box = grid.box
    theta = box.theta if theta is None else float(theta)
    weight = CarlemanWeight(lam=float(lam), theta=theta, b=box.b)

    pts = grid.points()
    x_t, x_h = tail_vectors(pts, basis.nodes, sources.d, k)
    p_tilde, p_hat = pair_tensors(basis, x_t, x_h)  # (N, N, 3, P)
    N = basis.N
    nx, ny, nz = grid.shape
    p_tilde = p_tilde.reshape(N, N, 3, nx, ny, nz)
    p_hat = p_hat.reshape(N, N, 3, nx, ny, nz)

    h, dz = grid.h, grid.h
    tw = np.ones(nz)
    tw[0] = tw[-1] = 0.5
    mu = weight.normalized(grid.zs)
    W = np.zeros((nx, ny, nz))
    W[1:-1, 1:-1, :] = h * h * dz * tw * mu
    return InversionSystem(
        grid=grid,
        basis=basis,
        k=float(k),
        weight=weight,
        psi0=lifted.psi0,
        psi1=lifted.psi1,
        p_tilde=p_tilde,
        p_hat=p_hat,
        W=W,
    )


def _components(system: InversionSystem, values):
    """Real layout -> complex components with the face plane pinned."""
    values = np.asarray(values, dtype=float)
    N = system.N
    want = (2 * N,) + system.grid.shape
    if values.shape != want:
        raise ValueError(f"iterate shape {values.shape} != {want}")
    c = values[0::2] + 1j * values[1::2]
    c[..., 0] = system.psi0  # the face is data, not an unknown
    return c


def _grad_fields(system: InversionSystem, c):
    """Difference gradient (N, 3, nx, ny, nz) of the components."""
    h = system.grid.h
    return np.stack(
        [_dx(c, h), _dy(c, h), _dz(c, h, system.psi1)], axis=1
    )


def nonlinearity_K(system: InversionSystem, grads):
    """K(grad V): quadratic coupling plus the two source-derivative terms.

    grads: (N, 3, nx, ny, nz) complex difference gradients.  Computes
    S^{-1} f with

        f_m = 2 sum_nl (grad v_n . grad v_l) T[m,n,l]
            + 2 sum_n  grad v_n . (P_tilde + P_hat)[m,n]
    """
    N = system.N
    spatial = grads.shape[2:]
    G = grads.reshape(N, 3, -1)
    P = system.p_total.reshape(N, N, 3, -1)
    T = system.basis.T
    D = np.einsum("nap,lap->nlp", G, G)
    f = 2.0 * np.einsum("mnl,nlp->mp", T, D) + 2.0 * np.einsum("mnap,nap->mp", P, G)
    K = system.basis.S_inv @ f
    return K.reshape((N,) + spatial)


def operator_Lh(system: InversionSystem, values):
    """Residual Lap V + K(grad V) on the grid (complex components).

    Defined on interior columns (the weight ignores the rest); vertical
    rows at the faces use the data/mirror ghosts.
    """
    c = _components(system, values)
    h = system.grid.h
    lap = _dxx(c, h) + _dyy(c, h) + _dzz(c, h, system.psi1)
    grads = _grad_fields(system, c)
    return lap + nonlinearity_K(system, grads)


@dataclass
class CostEvaluation:
    """Weighted residual cost and its exact gradient."""

    J: float
    J_raw: float
    grad: np.ndarray
    grad_norm: float


def cost_and_gradient(system: InversionSystem, values) -> CostEvaluation:
    """J(V) = sum of weighted |Lap V + K(grad V)|^2 and dJ/dV.

    J uses the peak-normalized weight; J_raw multiplies the peak back
    in and may overflow to inf for large lambda.  The gradient is the
    exact transpose-chain of the discrete residual: Laplacian stencils
    scattered back, the K Jacobian contracted against the weighted
    conjugate residual, all through the same ghost rules.  Entries on
    the pinned face are zero.
    """
    c = _components(system, values)
    grid = system.grid
    h = grid.h
    N = system.N
    lap = _dxx(c, h) + _dyy(c, h) + _dzz(c, h, system.psi1)
    grads = _grad_fields(system, c)
    L = lap + nonlinearity_K(system, grads)

    W = system.W
    J = float(np.sum(W * (L.real**2 + L.imag**2)))
    with np.errstate(over="ignore"):
        J_raw = J * system.weight.peak()

    # adjoint pass: g holds d/d(v_n conj-linear part); see module doc
    Wres = W * np.conj(L)  # (N, nx, ny, nz)
    g = _dxx_T(Wres, h) + _dyy_T(Wres, h) + _dzz_T(Wres, h)

    spatial = c.shape[1:]
    G = grads.reshape(N, 3, -1)
    U = np.einsum("mn,mp->np", system.basis.S_inv, Wres.reshape(N, -1))
    T = system.basis.T
    Tsym = T + T.transpose(0, 2, 1)
    Q = np.einsum("mnl,mp->nlp", Tsym, U)
    E = 2.0 * np.einsum("nlp,lap->nap", Q, G)
    E += 2.0 * np.einsum("mnap,mp->nap", system.p_total.reshape(N, N, 3, -1), U)
    E = E.reshape((N, 3) + spatial)
    g += _dx_T(E[:, 0], h) + _dy_T(E[:, 1], h) + _dz_T(E[:, 2], h)

    grad = np.empty((2 * N,) + spatial)
    grad[0::2] = 2.0 * g.real
    grad[1::2] = -2.0 * g.imag
    grad[..., 0] = 0.0  # face plane is pinned
    return CostEvaluation(
        J=J, J_raw=J_raw, grad=grad, grad_norm=float(np.linalg.norm(grad))
    )


# ---------------------------------------------------------------------------
# norms, ball constraint, descent


def h2_norm(values, grid: Grid3):
    """Depth-resolved H^2-type norm of a 2N-component real field.

    Sum over components and interior columns of h^2 * trapz_z of
    w^2 + w_z^2 + w_zz^2, vertical derivatives by second-order
    differences (one-sided at the faces).
    """
    values = np.asarray(values, dtype=float)
    dz = grid.h
    nz = values.shape[-1]
    tw = np.ones(nz)
    tw[0] = tw[-1] = 0.5
    wz = np.gradient(values, dz, axis=-1, edge_order=2)
    wzz = np.gradient(wz, dz, axis=-1, edge_order=2)
    dens = values**2 + wz**2 + wzz**2
    interior = dens[:, 1:-1, 1:-1, :]
    total = grid.h**2 * dz * np.sum(interior * tw)
    return float(np.sqrt(total))


@dataclass(frozen=True)
class BallConstraint:
    """Known bound M on the true iterate; projection uses radius 2M."""

    M: float

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError("ball radius must be positive")


def project_ball(values, center, grid: Grid3, ball: BallConstraint):
    """Radial projection of values onto the ball of radius 2M around
    center in the depth-resolved norm.  No-op inside the ball."""
    diff = np.asarray(values, dtype=float) - center
    nrm = h2_norm(diff, grid)
    limit = 2.0 * ball.M
    if nrm <= limit:
        return np.array(values, dtype=float, copy=True)
    return center + diff * (limit / nrm)


@dataclass(frozen=True)
class DescentSchedule:
    """Step-size policy: start at gamma1, halve after any step that
    increased J, stop when gamma or |dJ| fall below their floors."""

    gamma1: float = 1e-1
    gamma_min: float = 1e-10
    dj_min: float = 1e-10
    max_steps: int = 5000
    mode: str = "descent"
    M: float | None = None
    checkpoint_every: int = 0
    checkpoint_prefix: str | None = None

    def __post_init__(self):
        if self.gamma1 <= 0 or self.gamma_min <= 0 or self.dj_min < 0:
            raise ValueError("schedule constants must be positive")
        if self.mode not in ("descent", "projection"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "projection" and self.M is None:
            raise ValueError("projection mode needs an explicit ball radius M")


@dataclass
class MinimizeResult:
    values: np.ndarray
    J: float
    J_raw: float
    iterations: list
    reason: str


def minimize(
    system: InversionSystem,
    v0_values,
    schedule: DescentSchedule = DescentSchedule(),
    log_path=None,
    dump_path=None,
) -> MinimizeResult:
    """Gradient descent with the halving step schedule.

    Every step moves V <- V - gamma * grad (projected back onto the
    2M ball around the start in projection mode).  gamma halves after
    any step on which J increased, and the run stops when gamma
    underflows its floor, |dJ| stalls, or max_steps is hit.  Records
    one (step, gamma, J, grad_norm) row per iteration; NaN or Inf in
    J or the gradient aborts after dumping the iterate.
    """
    V = np.array(v0_values, dtype=float, copy=True)
    center = np.array(v0_values, dtype=float, copy=True)
    ball = BallConstraint(schedule.M) if schedule.mode == "projection" else None

    def guard(ev, iterate, step):
        if not np.isfinite(ev.J) or not np.isfinite(ev.grad_norm):
            if dump_path is not None:
                np.save(dump_path, iterate)
                where = f"; iterate dumped to {dump_path}"
            else:
                where = ""
            raise RuntimeError(
                f"non-finite cost or gradient at step {step}{where}"
            )

    ev = cost_and_gradient(system, V)
    guard(ev, V, 0)
    gamma = schedule.gamma1
    records = [(0, gamma, ev.J, ev.grad_norm)]
    reason = "max_steps"
    for m in range(1, schedule.max_steps + 1):
        V_new = V - gamma * ev.grad
        if ball is not None:
            V_new = project_ball(V_new, center, system.grid, ball)
        ev_new = cost_and_gradient(system, V_new)
        guard(ev_new, V_new, m)
        records.append((m, gamma, ev_new.J, ev_new.grad_norm))
        increased = ev_new.J > ev.J
        dj = abs(ev_new.J - ev.J)
        V, ev = V_new, ev_new
        if increased:
            gamma *= 0.5
        if gamma < schedule.gamma_min:
            reason = "gamma_floor"
            break
        if dj < schedule.dj_min:
            reason = "dj_floor"
            break
        if (
            schedule.checkpoint_every
            and schedule.checkpoint_prefix
            and m % schedule.checkpoint_every == 0
        ):
            np.save(f"{schedule.checkpoint_prefix}_{m:06d}.npy", V)
    if log_path is not None:
        write_iteration_log(log_path, records)
    return MinimizeResult(
        values=V, J=ev.J, J_raw=ev.J_raw, iterations=records, reason=reason
    )


def write_iteration_log(path, records):
    """CSV rows (step, gamma, J, grad_norm)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "gamma", "J", "grad_norm"])
        for row in records:
            w.writerow([row[0], f"{row[1]:.17g}", f"{row[2]:.17g}", f"{row[3]:.17g}"])
