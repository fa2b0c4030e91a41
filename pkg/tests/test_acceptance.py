"""Acceptance suite: ten numbered criteria, one test and one verdict
line each.

Criteria 7 and 8 run the genuine desk-scale pipeline (about 20 minutes
for the three noise levels together, dominated by the descent); the
rest finish in a couple of minutes. Two criteria fail by design and are
asserted as stated rather than loosened:

* criterion 1: the published 4.55 GHz row disagrees with the unit
  convention that reproduces the other four frequency/wavenumber pairs;
* criterion 7: the depth weighting that convexifies the objective also
  freezes gradient flow at the target's depth, so the recovered maximum
  plateaus near 3.4 instead of the required [7.5, 12.5] window (the
  lateral-location and classification clauses do pass).

Run with -s to see the verdict lines.
"""

import numpy as np
import pytest

from cwscat.basis import build_basis
from cwscat.cli import run_pipeline, run_simulate
from cwscat.config import load_config
from cwscat.convexify import (
    DescentSchedule,
    build_system,
    cost_and_gradient,
    minimize,
)
from cwscat.forward import (
    KernelFFT,
    add_noise,
    contrast,
    incident_field,
    self_cell_integral,
    solve_lippmann_schwinger,
)
from cwscat.geometry import (
    DomainBox,
    Grid3,
    MediumModel,
    SourceLine,
    add_box_inclusion,
    homogeneous_medium,
    wavenumber_from_frequency,
)
from cwscat.lift import starting_point
from cwscat.preprocess import PropagationSpec, propagate_plane
from cwscat.sweepio import read_sweep, write_sweep

SOURCES_01_06 = SourceLine()


def _verdict(num, ok, detail):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  ({detail})")
    return ok


def _smooth_traces(grid, N, scale, seed):
    rng = np.random.default_rng(seed)
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    psi0 = np.empty((N,) + X.shape, complex)
    psi1 = np.empty_like(psi0)
    for n in range(N):
        a = rng.standard_normal(6)
        psi0[n] = scale * (a[0] + a[1] * np.cos(X) + a[2] * np.sin(Y)
                           + 1j * (a[3] + 0.3 * a[4] * X * Y))
        psi1[n] = scale * (a[5] * np.cos(0.5 * X * Y) + 0.2j * a[0] * Y)
    return psi0, psi1


# ---------------------------------------------------------------------------
# 1. published frequency -> wavenumber table


def test_criterion_01_wavenumber_table():
    pairs = [(3.16e9, 6.62), (4.06e9, 8.51), (4.55e9, 9.55),
             (5.09e9, 10.67), (5.54e9, 11.61)]
    offs = [abs(wavenumber_from_frequency(f) - k_ref) for f, k_ref in pairs]
    ok = all(off <= 0.01 for off in offs)
    _verdict(1, ok, "worst offset %.4f, per pair %s"
             % (max(offs), ["%.4f" % o for o in offs]))
    assert ok, "one table row is outside +-0.01 under the common unit scale"


# ---------------------------------------------------------------------------
# 2. basis suite


def test_criterion_02_basis_suite():
    worst_gram = worst_det = 0.0
    triangular = True
    for N in range(1, 9):
        b = build_basis(0.1, 0.6, N)
        worst_gram = max(worst_gram, np.max(np.abs(b.gram() - np.eye(N))))
        worst_det = max(worst_det, abs(np.linalg.det(b.S) - 1.0))
        triangular &= np.allclose(np.tril(b.S, -1), 0.0, atol=0.0)
        triangular &= np.allclose(np.diag(b.S), 1.0, atol=1e-12)
    ok = worst_gram <= 1e-10 and worst_det <= 1e-10 and triangular
    _verdict(2, ok, f"gram dev {worst_gram:.2e}, det dev {worst_det:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 3. forward oracle equivalence


def test_criterion_03_forward_oracle():
    grid = Grid3(DomainBox(R=3.5, b=3.5, theta=4.0), Z_h=7)  # 8^3 nodes
    X, Y, Z = grid.meshgrid()
    prof = (np.cos(np.pi * X / 7) * np.cos(np.pi * Y / 7)
            * np.cos(np.pi * Z / 7)) ** 2
    shell = np.ones(grid.shape, dtype=bool)
    shell[1:-1, 1:-1, 1:-1] = False
    prof[shell] = 0.0

    med = MediumModel(grid, 1.0 + 0.5 * prof, 0.1 * prof)
    src, k = (0.4, 0.0, -9.0), 1.2
    sol = solve_lippmann_schwinger(med, src, k, tol=1e-12)

    pts = grid.points()
    kap = contrast(med, k).ravel()
    n = pts.shape[0]
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.exp(1j * k * r) / (4.0 * np.pi * r) * grid.h**3
    g[np.arange(n), np.arange(n)] = self_cell_integral(k, grid.h)
    mat = np.eye(n, dtype=complex) - g * kap[None, :]
    ref = np.linalg.solve(mat, incident_field(pts, src, k)).reshape(grid.shape)
    err_dense = np.abs(sol.u - ref).max() / np.abs(ref).max()

    hom = solve_lippmann_schwinger(homogeneous_medium(grid), src, 1.5)
    err_zero = np.abs(hom.u - hom.u_i).max()

    kernel = KernelFFT(grid, 1.0)
    errs = []
    for eps in (1e-3, 5e-4, 2.5e-4):
        m = MediumModel(grid, 1.0 + eps * prof, np.zeros(grid.shape))
        s = solve_lippmann_schwinger(m, src, 1.0, tol=1e-14)
        born1 = s.u_i + kernel.convolve(s.kappa * s.u_i)
        errs.append(np.linalg.norm(s.u - born1))
    slopes = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]

    ok = (err_dense <= 1e-8 and err_zero <= 1e-12
          and all(abs(s - 2.0) <= 0.2 for s in slopes))
    _verdict(3, ok, f"dense {err_dense:.2e}, zero-contrast {err_zero:.2e}, "
             f"born slopes {slopes[0]:.2f}/{slopes[1]:.2f}")
    assert ok


# ---------------------------------------------------------------------------
# 4. propagation suite


def test_criterion_04_propagation_suite():
    n, s, k = 32, 0.2, 2.0
    spec = PropagationSpec(z_source=-14.0, z_target=-2.0, k=k, spacing=s,
                           direction=1, pad_factor=1)
    out = propagate_plane(np.full((n, n), np.exp(1j * k * -14.0)), spec)
    err_plane = np.max(np.abs(out - np.exp(1j * k * -2.0)))

    def band_pass(field):
        kx = 2.0 * np.pi * np.fft.fftfreq(n, d=s)
        KX, KY = np.meshgrid(kx, kx, indexing="ij")
        F = np.fft.fft2(field)
        F[KX**2 + KY**2 > k**2] = 0.0
        return np.fft.ifft2(F)

    rng = np.random.default_rng(5)
    field = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    fwd = PropagationSpec(z_source=0.0, z_target=4.0, k=k, spacing=s,
                          direction=1, pad_factor=1)
    back = PropagationSpec(z_source=4.0, z_target=0.0, k=k, spacing=s,
                           direction=1, pad_factor=1)
    ref = band_pass(field)
    out = propagate_plane(field, fwd)
    err_norm = abs(np.linalg.norm(out) - np.linalg.norm(ref))
    rt = propagate_plane(out, back)
    err_rt = np.linalg.norm(rt - ref)

    scale = np.linalg.norm(ref)
    ok = (err_plane <= 1e-6 and err_norm <= 1e-10 * scale
          and err_rt <= 1e-10 * scale)
    _verdict(4, ok, f"plane wave {err_plane:.2e}, band norm {err_norm:.2e}, "
             f"round trip {err_rt:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 5. gradient exactness


def test_criterion_05_gradient_exactness():
    grid = Grid3(DomainBox(R=1.0, b=1.0, theta=1.25), Z_h=15)  # 16^3
    basis = build_basis(0.1, 0.6, 3)
    psi0, psi1 = _smooth_traces(grid, 3, 0.05, 11)
    lf = starting_point(psi0, psi1, grid, basis)
    system = build_system(lf, SOURCES_01_06, k=8.51, lam=1.1)
    rng = np.random.default_rng(12)
    eps = 1e-6
    worst = 0.0
    for _ in range(20):
        V = lf.values + 0.02 * rng.standard_normal(lf.values.shape)
        r = rng.standard_normal(V.shape)
        r[..., 0] = 0.0
        directional = float(np.sum(cost_and_gradient(system, V).grad * r))
        fd = (cost_and_gradient(system, V + eps * r).J
              - cost_and_gradient(system, V - eps * r).J) / (2 * eps)
        worst = max(worst, abs(fd - directional) / abs(fd))
    ok = worst <= 1e-6
    _verdict(5, ok, f"worst relative error {worst:.2e} over 20 pairs")
    assert ok


# ---------------------------------------------------------------------------
# 6. numerical convexity gap


def test_criterion_06_convexity_gap():
    grid = Grid3(DomainBox(R=1.0, b=1.0, theta=1.25), Z_h=8)  # theta = 1.25 b
    basis = build_basis(0.1, 0.6, 2)
    psi0, psi1 = _smooth_traces(grid, 2, 0.05, 21)
    lf = starting_point(psi0, psi1, grid, basis)

    rng = np.random.default_rng(7)
    pairs = []
    for _ in range(50):
        V = lf.values + 0.5 * rng.standard_normal(lf.values.shape)
        V[..., 0] = lf.values[..., 0]
        r = 0.5 * rng.standard_normal(V.shape)
        r[..., 0] = 0.0
        pairs.append((V, r))

    counts = []
    for lam in (1.0, 5.0, 20.0, 50.0):
        system = build_system(lf, SOURCES_01_06, k=8.51, lam=lam)
        bad = 0
        for V, r in pairs:
            e0 = cost_and_gradient(system, V)
            e1 = cost_and_gradient(system, V + r)
            gap = e1.J - e0.J - float(np.sum(e0.grad * r))
            if gap < -1e-12 * (abs(e0.J) + abs(e1.J) + 1.0):
                bad += 1
        counts.append(bad)

    ok = counts[-1] == 0 and all(a >= b for a, b in zip(counts, counts[1:]))
    _verdict(6, ok, f"violations per lambda {{1,5,20,50}}: {counts}")
    assert ok


# ---------------------------------------------------------------------------
# 7/8. desk-scale synthetic reconstruction, three noise levels
#
# Shared fixture: one clean forward sweep, then per-delta noise, then the
# staged pipeline.  gamma1 = 3.5e-7 is the stability limit of the descent
# at this grid (the criterion pins lambda/N/k/delta/sources, not the
# schedule constants); measurement geometry is chosen so the continuation
# step is accurate (plane close below the scene, wide aperture).

DESK = [
    "measurement.z_meas=-3", "measurement.half_width=7",
    "measurement.n_detectors=50",
    "inversion.gamma1=3.5e-7", "inversion.max_steps=3000",
]


@pytest.fixture(scope="module")
def delta_sweep(tmp_path_factory):
    base = tmp_path_factory.mktemp("desk")

    # the criterion-7 run is the full pipeline at delta = 0.03
    cfg = load_config(None, DESK + [f"paths.outdir={base/'d003'}",
                                    "noise.delta=0.03"])
    res = run_pipeline(cfg)

    grid = res.grid
    c_true = add_box_inclusion(homogeneous_medium(grid), center=(0, 0, -1),
                               side=1.0, c_value=10.0, sigma_value=0.5).c
    voxel = grid.h ** 3

    def l2(c_comp):
        return float(np.sqrt(voxel * np.sum((c_comp - c_true) ** 2)))

    runs = {0.03: (res, l2(res.c_comp))}

    # clean simulate once; reuse its solves for delta = 0 and 0.10
    cfg0 = load_config(None, DESK + [f"paths.outdir={base/'d000'}",
                                     "noise.delta=0"])
    run_simulate(cfg0)
    clean = read_sweep(cfg0.path("sweep_raw"))
    res0 = run_pipeline(load_config(None, DESK + [
        f"paths.outdir={base/'d000'}", "noise.delta=0",
        "stages.simulate=false"]))
    runs[0.0] = (res0, l2(res0.c_comp))

    d010 = base / "d010"
    d010.mkdir()
    write_sweep(d010 / "sweep_raw.dat", add_noise(clean, 0.10, cfg0.seed))
    res10 = run_pipeline(load_config(None, DESK + [
        f"paths.outdir={d010}", "noise.delta=0.10",
        "stages.simulate=false"]))
    runs[0.10] = (res10, l2(res10.c_comp))
    return runs


def test_criterion_07_synthetic_reconstruction(delta_sweep):
    res, _ = delta_sweep[0.03]
    in_window = 7.5 <= res.max_c <= 12.5
    cen = res.centroid("c")
    lateral = float(np.hypot(cen[0], cen[1]))
    on_target = lateral <= 0.5
    rule = res.conductive == (res.max_sigma > 1.0)
    ok = in_window and on_target and rule
    _verdict(7, ok, f"max c {res.max_c:.3f} vs [7.5, 12.5], "
             f"lateral {lateral:.3f} vs 0.5, sigma rule {rule}")
    assert on_target and rule
    assert in_window, (
        "recovered maximum plateaus below the window: the depth weight "
        "ratio face-to-target is ~1e-11 at lambda = 1.1, freezing the "
        "layers that carry c = 10 (see the decisions ledger)")


def test_criterion_08_noise_monotonicity(delta_sweep):
    errs = [delta_sweep[d][1] for d in (0.0, 0.03, 0.10)]
    ok = errs[0] <= errs[1] <= errs[2]
    _verdict(8, ok, "L2 errors %.4f / %.4f / %.4f for delta 0/0.03/0.10"
             % tuple(errs))
    assert ok


# ---------------------------------------------------------------------------
# 9. descent schedule conformance


def test_criterion_09_schedule_conformance():
    grid = Grid3(DomainBox(R=1.0, b=1.0, theta=1.25), Z_h=8)
    basis = build_basis(0.1, 0.6, 2)
    psi0, psi1 = _smooth_traces(grid, 2, 0.01, 21)
    lf = starting_point(psi0, psi1, grid, basis)
    # k = 1.5 keeps the first gamma = 0.1 trial step finite so the
    # halving ladder, not the overflow guard, is what gets exercised
    system = build_system(lf, SOURCES_01_06, k=1.5, lam=1.1)

    sched = DescentSchedule(gamma1=1e-1, gamma_min=1e-10, dj_min=1e-10,
                            max_steps=200000)
    res = minimize(system, lf.values, sched)
    rows = res.iterations
    conforming = True
    for m in range(1, len(rows)):
        decreased = rows[m][2] <= rows[m - 1][2]
        # a step that raised J halves gamma; the halving lands on the
        # next recorded row (unobservable only when termination follows)
        halved = m + 1 < len(rows) and rows[m + 1][1] == rows[m][1] / 2.0
        conforming &= decreased or halved or m == len(rows) - 1
    terminated = res.reason in ("dj_floor", "gamma_floor")
    started = rows[0][1] == 1e-1

    ok = conforming and terminated and started
    _verdict(9, ok, f"{len(rows) - 1} steps, stop reason {res.reason!r}, "
             f"final gamma {rows[-1][1]:.3g}")
    assert ok


# ---------------------------------------------------------------------------
# 10. determinism


def test_criterion_10_determinism(tmp_path):
    shoebox = [
        "domain.R=1", "domain.b=1", "domain.theta=1.25", "grid.Z_h=8",
        "sources.d=3", "measurement.z_meas=-2.5", "measurement.half_width=3",
        "measurement.n_detectors=12", "forward.k=1.5",
        "target.center=0, 0, -0.25", "target.side=0.6", "target.c=1.3",
        "target.sigma=0", "noise.delta=0.03", "noise.seed=7",
        "inversion.gamma1=1e-6", "inversion.max_steps=5",
    ]
    vols = ["volume_c_raw.vtk", "volume_sigma_raw.vtk",
            "volume_c.vtk", "volume_sigma.vtk"]
    payloads = []
    for sub in ("a", "b"):
        cfg = load_config(None, shoebox + [f"paths.outdir={tmp_path / sub}"])
        run_pipeline(cfg)
        payloads.append([(tmp_path / sub / v).read_bytes() for v in vols])
    ok = payloads[0] == payloads[1]
    _verdict(10, ok, f"{len(vols)} volume files, bit compare")
    assert ok
