"""Turning far detector data into usable Cauchy data on the box face.

Measured grids live on a plane far below the box.  In the source-free
gap between that plane and the face z = -b the scattered field is a
one-way wave, so each transverse Fourier mode (kx, ky) with
kx^2 + ky^2 <= k^2 carries a pure phase exp(i s kz dz),
kz = sqrt(k^2 - kx^2 - ky^2), where s is the sign of the wave's travel
along z (backscattered data run toward -z, s = -1).  Evanescent modes
are dropped: they are noise by the time they reach the detectors.
Multiplying each propagating mode by i s kz delivers the z-derivative
on the target plane from the same data, so one measured grid yields
both Cauchy traces.

Truncation and smoothing reproduce the data hygiene used on measured
sweeps: zero everything below a fixed fraction of the peak, then blur
and rescale so the peak magnitude is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import gaussian_filter

from .geometry import MeasurementPlane
from .sweepio import SourceSweepData

__all__ = [
    "PropagationSpec",
    "propagate_plane",
    "propagate_derivative",
    "truncate_field",
    "smooth_and_retrieve",
    "preprocess_sweep",
]


@dataclass(frozen=True)
class PropagationSpec:
    """Geometry of a plane-to-plane continuation.

    direction is the sign s in the one-way mode dependence
    exp(i s kz z): +1 for waves running toward +z, -1 for waves running
    toward -z.  delta_z = z_target - z_source is signed; continuation
    against the travel direction (toward the wave's sources) is allowed
    and is exactly what the backscattering pipeline does.
    """

    z_source: float
    z_target: float
    k: float
    spacing: float
    direction: int = 1
    pad_factor: int = 2

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")
        if self.spacing <= 0:
            raise ValueError("sample spacing must be positive")
        if self.spacing > np.pi / self.k + 1e-12:
            raise ValueError(
                f"plane is undersampled: spacing {self.spacing:.4g} exceeds "
                f"the half-wavelength limit {np.pi / self.k:.4g}"
            )
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")
        if self.pad_factor < 1:
            raise ValueError("pad_factor must be >= 1")
        if self.z_target == self.z_source:
            raise ValueError("target plane coincides with the source plane")

    @property
    def delta_z(self):
        return self.z_target - self.z_source


def _spectral_factors(n, spec: PropagationSpec):
    L = sfft.next_fast_len(spec.pad_factor * n)
    kx = 2.0 * np.pi * sfft.fftfreq(L, d=spec.spacing)
    KX, KY = np.meshgrid(kx, kx, indexing="ij")
    ksq = spec.k**2 - KX**2 - KY**2
    band = ksq >= 0.0
    kz = np.sqrt(np.where(band, ksq, 0.0))
    return L, band, kz


def propagate_plane(field, spec: PropagationSpec):
    """Continue a sampled one-way field to the target plane.

    Propagating modes pick up exp(i * direction * kz * delta_z);
    evanescent modes are zeroed.  The input window is zero-padded by
    pad_factor before the transform and cropped back afterwards.
    """
    f = np.asarray(field, dtype=complex)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"expected a square 2-D grid, got shape {f.shape}")
    n = f.shape[0]
    L, band, kz = _spectral_factors(n, spec)
    F = sfft.fft2(f, s=(L, L))
    F *= band * np.exp(1j * spec.direction * kz * spec.delta_z)
    return sfft.ifft2(F)[:n, :n]


def propagate_derivative(field, spec: PropagationSpec):
    """z-derivative of the continued field on the target plane.

    Identical to propagate_plane with every propagating mode carrying
    the extra factor i * direction * kz.
    """
    f = np.asarray(field, dtype=complex)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"expected a square 2-D grid, got shape {f.shape}")
    n = f.shape[0]
    L, band, kz = _spectral_factors(n, spec)
    F = sfft.fft2(f, s=(L, L))
    F *= band * (1j * spec.direction * kz) * np.exp(
        1j * spec.direction * kz * spec.delta_z
    )
    return sfft.ifft2(F)[:n, :n]


def truncate_field(field, kappa1):
    """Zero every sample with |value| < kappa1 * max |value|.

    Keeps the peak untouched and is idempotent.  kappa1 = 0.4 is the
    working value for propagated data, 0.2 for recovered coefficients.
    """
    if not 0.0 <= kappa1 < 1.0:
        raise ValueError(f"truncation fraction must be in [0, 1), got {kappa1}")
    f = np.asarray(field)
    peak = np.max(np.abs(f))
    if peak == 0.0:
        return f.copy()
    return np.where(np.abs(f) >= kappa1 * peak, f, 0.0)


def smooth_and_retrieve(field, sigma=1.0, window=5):
    """Gaussian blur with peak-magnitude retrieval.

    Real and imaginary parts are blurred separately with a Gaussian of
    the given sigma (in samples) on a window x window support, then the
    result is rescaled by kappa2 = max|input| / max|smoothed| so the
    peak magnitude survives.  Returns (smoothed, kappa2).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd size >= 3")
    f = np.asarray(field)
    truncate = ((window - 1) // 2) / sigma
    if np.iscomplexobj(f):
        sm = gaussian_filter(f.real, sigma, truncate=truncate, mode="nearest") \
            + 1j * gaussian_filter(f.imag, sigma, truncate=truncate, mode="nearest")
    else:
        sm = gaussian_filter(f.astype(float), sigma, truncate=truncate, mode="nearest")
    peak_in = np.max(np.abs(f))
    peak_sm = np.max(np.abs(sm))
    if peak_sm == 0.0:
        return sm, 1.0
    kappa2 = peak_in / peak_sm
    return sm * kappa2, kappa2


def preprocess_sweep(
    sweep: SourceSweepData,
    z_target,
    *,
    direction=-1,
    pad_factor=2,
    kappa1=0.4,
    sigma=1.0,
    window=5,
):
    """Full data hygiene for a background-subtracted sweep.

    Continues every source's F0 grid from the detector plane to
    z_target (both the field and its z-derivative), then truncates and
    smooths both.  Returns (propagated, truncated) sweeps; the
    detector raster is kept, only the plane depth changes.
    """
    if sweep.field_kind != "scattered":
        raise ValueError(
            "propagation requires background-subtracted data; got "
            f"field_kind={sweep.field_kind!r}"
        )
    if sweep.stage != "raw":
        raise ValueError(f"expected a raw sweep, got stage={sweep.stage!r}")
    spec = PropagationSpec(
        z_source=sweep.plane.z_meas,
        z_target=float(z_target),
        k=sweep.k,
        spacing=sweep.plane.spacing,
        direction=direction,
        pad_factor=pad_factor,
    )
    p0 = np.empty_like(sweep.F0)
    p1 = np.empty_like(sweep.F0)
    for s in range(sweep.n_sources):
        p0[s] = propagate_plane(sweep.F0[s], spec)
        p1[s] = propagate_derivative(sweep.F0[s], spec)
    plane_t = MeasurementPlane(
        z_meas=float(z_target),
        half_width=sweep.plane.half_width,
        n_detectors=sweep.plane.n_detectors,
    )
    propagated = sweep.replace(stage="propagated", plane=plane_t, F0=p0, F1=p1)
    t0 = np.empty_like(p0)
    t1 = np.empty_like(p1)
    for s in range(sweep.n_sources):
        t0[s], _ = smooth_and_retrieve(truncate_field(p0[s], kappa1), sigma, window)
        t1[s], _ = smooth_and_retrieve(truncate_field(p1[s], kappa1), sigma, window)
    truncated = propagated.replace(stage="truncated", F0=t0, F1=t1)
    return propagated, truncated
