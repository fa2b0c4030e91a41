"""Orthonormal exponential-polynomial basis on the source interval.

The functions alpha^n * exp(alpha), n = 0, 1, ..., are linearly
independent on [a1, a2] and their span is closed under d/d(alpha).
Gram-Schmidt on the first N of them yields an orthonormal family
Psi_0..Psi_{N-1} whose stiffness-like matrix

    S[m][n] = <Psi_n', Psi_m>

is upper triangular with unit diagonal, hence invertible with
determinant one no matter how many terms are kept.  That property is
what makes the truncated expansion of multi-source data usable: the
second-derivative-free system obtained by projecting onto this basis
can always be solved for the leading coefficients.

The polynomial factor of each Psi_n is stored as shifted-Legendre
coefficients on [a1, a2] rather than raw monomial ones: the monomial
family alpha^n e^alpha is nearly dependent on a short interval, and by
n ~ 6 monomial coefficients reach 1e6 with catastrophic cancellation in
every inner product.  Legendre coefficients stay O(1), differentiation
is still exact (a polynomial recurrence), and orthonormality holds at
machine precision through N = 8 and beyond.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["BasisSet", "build_basis", "triple_tensors", "pair_tensors"]


def exp_poly_moments(a1, a2, max_degree):
    """Exact integrals m_j = int_{a1}^{a2} alpha^j exp(2 alpha) d(alpha).

    Integration by parts gives m_j = [a^j e^{2a}/2] - (j/2) m_{j-1}.
    Running that upward multiplies rounding by j/2 per step, so it is
    run downward instead: any error seeded at the top degree dies off
    by the same factor, and starting ~40 degrees above with the crude
    value-at-midpoint estimate leaves the requested moments exact to
    machine precision.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    top = max_degree + 40
    e1, e2 = np.exp(2.0 * a1), np.exp(2.0 * a2)
    m = np.empty(top + 1)
    # seed: midpoint value; its error is suppressed by prod(2/j) below
    mid = 0.5 * (a1 + a2)
    m[top] = (a2 - a1) * mid**top * np.exp(2.0 * mid)
    for j in range(top, 0, -1):
        m[j - 1] = ((a2**j * e2 - a1**j * e1) / 2.0 - m[j]) * (2.0 / j)
    return m[: max_degree + 1]


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Orthonormal basis plus the precomputed algebra the solver needs.

    coef[n, j]   : Psi_n = p_n(t(alpha)) * exp(alpha) with p_n given by
                   Legendre coefficients in t = (2 alpha - a1 - a2)/(a2 - a1)
    dcoef[n, j]  : same representation for the polynomial factor of Psi_n'
    S, S_inv     : S[m, n] = <Psi_n', Psi_m> and its inverse
    T[m, n, l]   : int Psi_m Psi_n Psi_l' d(alpha)
    nodes, weights : Gauss-Legendre rule on [a1, a2] used for every
                     integral against foreign functions.
    """

    a1: float
    a2: float
    N: int
    quad_order: int
    coef: np.ndarray = field(repr=False)
    dcoef: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    S_inv: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.coef, self.dcoef, self.S, self.S_inv, self.T,
                    self.nodes, self.weights):
            arr.setflags(write=False)

    def evaluate(self, alpha, derivative=False):
        """Values Psi_n(alpha), shape (N, *alpha.shape)."""
        alpha = np.asarray(alpha, dtype=float)
        t = (2.0 * alpha.ravel() - self.a1 - self.a2) / (self.a2 - self.a1)
        c = self.dcoef if derivative else self.coef
        vals = np.polynomial.legendre.legval(t, c.T) * np.exp(alpha.ravel())
        return vals.reshape((self.N,) + alpha.shape)

    def gram(self):
        """Quadrature Gram matrix of the basis (identity up to rounding)."""
        v = self.evaluate(self.nodes)
        return (v * self.weights) @ v.T

    def project(self, samples_at_nodes):
        """Coefficients <f, Psi_n> of samples given at the quadrature nodes.

        samples_at_nodes has the node axis last; the result replaces it
        by a leading axis of length N.
        """
        f = np.asarray(samples_at_nodes)
        v = self.evaluate(self.nodes) * self.weights  # (N, nq)
        return np.tensordot(v, f, axes=(1, -1))


def build_basis(a1, a2, N, quad_order=32) -> BasisSet:
    """Orthonormalize alpha^n exp(alpha), n < N, on [a1, a2].

    Raises if the requested quadrature cannot reproduce the exact
    weighted moments up to degree 2N+2 at 1e-12: every downstream
    integral is smoother than those, so this check bounds the rule.
    """
    a1, a2 = float(a1), float(a2)
    if not a1 < a2:
        raise ValueError(f"need a1 < a2, got [{a1}, {a2}]")
    N = int(N)
    if N < 1:
        raise ValueError("basis size N must be >= 1")
    if quad_order < 2:
        raise ValueError("quadrature order must be >= 2")

    leg = np.polynomial.legendre
    x, w = leg.leggauss(int(quad_order))
    nodes = 0.5 * (a2 - a1) * x + 0.5 * (a1 + a2)
    weights = 0.5 * (a2 - a1) * w

    # the rule must reproduce the exact weighted moments
    moments = exp_poly_moments(a1, a2, 2 * N + 2)
    check = np.exp(2.0 * nodes)
    for j in range(2 * N + 3):
        err = abs(np.sum(weights * nodes**j * check) - moments[j])
        if err > 1e-12:
            raise ValueError(
                f"quadrature order {quad_order} misses degree-{j} weighted "
                f"moment by {err:.2e}; increase the order"
            )

    # seed family alpha^n, n < N, as Legendre coefficients in the
    # mapped variable t; alpha = mid + half * t
    mid, half = 0.5 * (a1 + a2), 0.5 * (a2 - a1)
    coef = np.zeros((N, N))
    mono = np.polynomial.polynomial.Polynomial([1.0])
    shift = np.polynomial.polynomial.Polynomial([mid, half])
    for n in range(N):
        c = leg.poly2leg(mono.coef)
        coef[n, : c.size] = c
        mono = mono * shift

    # modified Gram-Schmidt against the quadrature inner product,
    # twice; value vectors and coefficients updated in lockstep
    e_nodes = np.exp(nodes)
    vals = leg.legval(x, coef.T) * e_nodes  # (N, nq)
    for _ in range(2):
        for n in range(N):
            for m in range(n):
                proj = np.sum(weights * vals[m] * vals[n])
                vals[n] -= proj * vals[m]
                coef[n] -= proj * coef[m]
            nrm = np.sqrt(np.sum(weights * vals[n] ** 2))
            if not nrm > 0:
                raise ValueError("basis functions are numerically dependent")
            vals[n] /= nrm
            coef[n] /= nrm

    # (p e^a)' = (p + p'/half) e^a; legder is exact on the coefficients
    dcoef = coef.copy()
    for n in range(N):
        d = leg.legder(coef[n]) / half
        dcoef[n, : d.size] += d

    dvals = leg.legval(x, dcoef.T) * e_nodes
    S = (vals * weights) @ dvals.T  # S[m, n] = <Psi_n', Psi_m>
    # Psi_n' - Psi_n has polynomial degree < n, so the lower triangle
    # of S is exactly zero; verify the quadrature agrees, then store
    # the structural zeros (they would otherwise pollute det and S_inv
    # through the large upper-triangle cofactors).
    dirt = np.abs(np.tril(S, -1)).max() if N > 1 else 0.0
    if dirt > 1e-10:
        raise ValueError(
            f"basis construction lost triangularity of S (residue {dirt:.2e})"
        )
    S = np.triu(S)
    S_inv = np.linalg.inv(S)

    bs = BasisSet(
        a1=a1, a2=a2, N=N, quad_order=int(quad_order),
        coef=coef, dcoef=dcoef, S=S, S_inv=S_inv,
        T=np.zeros((N, N, N)), nodes=nodes, weights=weights,
    )
    object.__setattr__(bs, "T", triple_tensors(bs))
    bs.T.setflags(write=False)
    return bs


def triple_tensors(basis: BasisSet):
    """T[m][n][l] = int Psi_m Psi_n Psi_l' d(alpha) by quadrature."""
    v = basis.evaluate(basis.nodes)                    # (N, nq)
    dv = basis.evaluate(basis.nodes, derivative=True)  # (N, nq)
    return np.einsum("mq,nq,lq,q->mnl", v, v, dv, basis.weights)


def pair_tensors(basis: BasisSet, x_tilde, x_hat):
    """Source-weighted vector tensors for the gradient coupling terms.

    x_tilde and x_hat hold the two source-derivative vector fields
    sampled at the quadrature nodes: shape (nq, npts, 3), complex.
    Returns (P_tilde, P_hat), each (N, N, 3, npts), with

        P_tilde[m, n] = int Psi_m Psi_n' x_tilde(., alpha) d(alpha)
        P_hat[m, n]   = int Psi_m Psi_n  x_hat(., alpha)  d(alpha)
    """
    x_tilde = np.asarray(x_tilde)
    x_hat = np.asarray(x_hat)
    nq = basis.nodes.size
    if x_tilde.shape[0] != nq or x_hat.shape[0] != nq:
        raise ValueError("vector fields must be sampled at the quadrature nodes")
    v = basis.evaluate(basis.nodes) * basis.weights    # (N, nq) weighted
    dv = basis.evaluate(basis.nodes, derivative=True)  # (N, nq)
    vp = basis.evaluate(basis.nodes)                   # (N, nq)
    p_tilde = np.einsum("mq,nq,qpa->mnap", v, dv, x_tilde)
    p_hat = np.einsum("mq,nq,qpa->mnap", v, vp, x_hat)
    return p_tilde, p_hat
