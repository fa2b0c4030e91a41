"""Container and file formats for multi-source detector sweeps.

One sweep = one wavenumber, one source line, one detector plane, and a
complex field sample per (source, detector).  The on-disk format is a
two-line text header (magic + JSON metadata) followed by the raw
samples: for every source in order, the F0 grid row-major as pairs of
little-endian 64-bit floats (re, im); if the z-derivative F1 is
present, its per-source blocks follow the same way.  The layout is
bit-exact under write/read round trips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace as _dc_replace

import numpy as np

from .geometry import MeasurementPlane

__all__ = ["SourceSweepData", "write_sweep", "read_sweep", "export_sweep_csv"]

MAGIC = b"CWSWEEP 1\n"
STAGES = ("raw", "propagated", "truncated")
FIELD_KINDS = ("total", "scattered")


@dataclass(frozen=True, eq=False)
class SourceSweepData:
    """Per-source complex detector grids F0 (field) and optional F1
    (z-derivative), with enough geometry to interpret them."""

    k: float
    d: float
    alphas: np.ndarray
    plane: MeasurementPlane
    stage: str
    field_kind: str
    F0: np.ndarray
    F1: np.ndarray | None = None
    noise_delta: float | None = None
    noise_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=float))
        object.__setattr__(self, "F0", np.asarray(self.F0, dtype=complex))
        if self.F1 is not None:
            object.__setattr__(self, "F1", np.asarray(self.F1, dtype=complex))
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}, expected one of {STAGES}")
        if self.field_kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.field_kind!r}")
        n = self.plane.n_detectors
        want = (self.alphas.size, n, n)
        if self.F0.shape != want:
            raise ValueError(f"F0 shape {self.F0.shape} does not match {want}")
        if self.F1 is not None and self.F1.shape != want:
            raise ValueError(f"F1 shape {self.F1.shape} does not match {want}")

    @property
    def n_sources(self):
        return self.alphas.size

    def replace(self, **changes):
        return _dc_replace(self, **changes)


def _header_dict(sweep: SourceSweepData):
    hdr = {
        "k": sweep.k,
        "d": sweep.d,
        "alphas": list(map(float, sweep.alphas)),
        "plane": {
            "z_meas": sweep.plane.z_meas,
            "half_width": sweep.plane.half_width,
            "n_detectors": sweep.plane.n_detectors,
        },
        "stage": sweep.stage,
        "field": sweep.field_kind,
        "has_f1": sweep.F1 is not None,
    }
    if sweep.noise_delta is not None:
        hdr["noise_delta"] = sweep.noise_delta
        hdr["noise_seed"] = sweep.noise_seed
    return hdr


def write_sweep(path, sweep: SourceSweepData):
    """Binary sweep file: magic, JSON header line, then the samples."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(_header_dict(sweep), sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(sweep.F0).astype("<c16").tobytes())
        if sweep.F1 is not None:
            fh.write(np.ascontiguousarray(sweep.F1).astype("<c16").tobytes())


def read_sweep(path) -> SourceSweepData:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise ValueError(f"{path}: not a sweep file (bad magic {magic!r})")
        hdr = json.loads(fh.readline().decode())
        payload = fh.read()
    plane = MeasurementPlane(
        z_meas=hdr["plane"]["z_meas"],
        half_width=hdr["plane"]["half_width"],
        n_detectors=hdr["plane"]["n_detectors"],
    )
    n = plane.n_detectors
    n_src = len(hdr["alphas"])
    block = n_src * n * n
    want = block * (2 if hdr["has_f1"] else 1) * 16
    if len(payload) != want:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {want}")
    raw = np.frombuffer(payload, dtype="<c16")
    f0 = raw[:block].reshape(n_src, n, n).astype(complex)
    f1 = raw[block:].reshape(n_src, n, n).astype(complex) if hdr["has_f1"] else None
    return SourceSweepData(
        k=hdr["k"],
        d=hdr["d"],
        alphas=np.array(hdr["alphas"]),
        plane=plane,
        stage=hdr["stage"],
        field_kind=hdr["field"],
        F0=f0,
        F1=f1,
        noise_delta=hdr.get("noise_delta"),
        noise_seed=hdr.get("noise_seed"),
    )


def export_sweep_csv(path, sweep: SourceSweepData):
    """Plain-text dump of F0: one row per (source, detector) sample."""
    ax = sweep.plane.axis
    with open(path, "w") as fh:
        fh.write("x,y,alpha,re,im\n")
        for s, alpha in enumerate(sweep.alphas):
            for i, x in enumerate(ax):
                for j, y in enumerate(ax):
                    val = sweep.F0[s, i, j]
                    fh.write(
                        f"{x:.17g},{y:.17g},{alpha:.17g},"
                        f"{val.real:.17g},{val.imag:.17g}\n"
                    )
