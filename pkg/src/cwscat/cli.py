"""Batch pipeline: simulate, preprocess, invert, extract.

Stages communicate only through files inside the configured output
directory, so each can run (and be rerun) on its own; every stage
appends a block to the run report with its wall time and the complete
parameter set.  All randomness flows from the single configured seed,
which makes reruns with an identical configuration bit-reproducible.
"""

from __future__ import annotations

import argparse
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from .basis import build_basis
from .config import ConfigError, PipelineConfig, config_text, load_config
from .convexify import DescentSchedule, build_system, minimize
from .extract import export_volume, reconstruct, write_summary
from .forward import add_noise, synthesize_sweep
from .geometry import (
    DomainBox,
    MeasurementPlane,
    PhysicalConstants,
    SourceLine,
    add_box_inclusion,
    homogeneous_medium,
    make_grid,
    wavenumber_from_frequency,
)
from .lift import LiftedField, cauchy_data, read_lifted, starting_point, write_lifted
from .preprocess import preprocess_sweep
from .sweepio import read_sweep, write_sweep

__all__ = [
    "run_simulate",
    "run_preprocess",
    "run_invert",
    "run_extract",
    "run_pipeline",
    "main",
]


def _constants(config: PipelineConfig):
    return PhysicalConstants(eta0=config.eta0, c_scaled=config.c_scaled)


def _box(config: PipelineConfig):
    return DomainBox(R=config.R, b=config.b, theta=config.theta)


def _sources(config: PipelineConfig):
    return SourceLine(d=config.d, a1=config.a1, a2=config.a2, step=config.step)


def _plane(config: PipelineConfig):
    return MeasurementPlane(
        z_meas=config.z_meas,
        half_width=config.half_width,
        n_detectors=config.n_detectors,
    )


def _grid(config: PipelineConfig):
    return make_grid(_box(config), config.Z_h, config.h0)


def _wavenumber(config: PipelineConfig):
    if config.frequency_hz is not None:
        return wavenumber_from_frequency(config.frequency_hz, _constants(config))
    return config.k


def _medium(config: PipelineConfig):
    grid = _grid(config)
    medium = homogeneous_medium(grid)
    kind = config.target_kind.lower()
    if kind in ("none", "homogeneous"):
        return medium
    if kind == "box":
        return add_box_inclusion(
            medium,
            center=config.target_center,
            side=config.target_side,
            c_value=config.target_c,
            sigma_value=config.target_sigma,
        )
    raise ConfigError(f"unknown target kind {config.target_kind!r}")


def _require(path: Path, producer):
    if not path.exists():
        raise FileNotFoundError(
            f"missing stage input {path}; run the {producer} stage first"
        )
    return path


def _report(config: PipelineConfig, stage, seconds, extra=()):
    """Append one run-report block: stage, wall time, parameters."""
    path = config.path("report")
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [f"== {stage} at {stamp}, wall {seconds:.3f} s =="]
    lines += [f"{key} = {value}" for key, value in extra]
    lines.append("-- configuration --")
    lines.append(config_text(config))
    with open(path, "a") as fh:
        fh.write("\n".join(lines) + "\n")


def run_simulate(config: PipelineConfig):
    """Forward-model the detector sweep and store the raw scattered data."""
    t0 = time.perf_counter()
    Path(config.outdir).mkdir(parents=True, exist_ok=True)
    k = _wavenumber(config)
    medium = _medium(config)
    _, scattered = synthesize_sweep(
        medium,
        _sources(config),
        _plane(config),
        k,
        constants=_constants(config),
        tol=config.forward_tol,
        solver_kwargs={
            "max_born": config.max_born,
            "gmres_restart": config.gmres_restart,
            "gmres_maxiter": config.gmres_maxiter,
        },
    )
    if config.noise_delta > 0:
        scattered = add_noise(scattered, config.noise_delta, config.seed)
    out = config.path("sweep_raw")
    write_sweep(out, scattered)
    _report(
        config,
        "simulate",
        time.perf_counter() - t0,
        [
            ("k", f"{k:.17g}"),
            ("sources", scattered.n_sources),
            ("noise_delta", config.noise_delta),
            ("seed", config.seed),
            ("output", out),
        ],
    )
    return out


def run_preprocess(config: PipelineConfig):
    """Continue the sweep to the box face and apply truncation/smoothing."""
    t0 = time.perf_counter()
    Path(config.outdir).mkdir(parents=True, exist_ok=True)
    raw = _require(config.path("sweep_raw"), "simulate")
    sweep = read_sweep(raw)
    _, truncated = preprocess_sweep(
        sweep,
        z_target=-config.b,
        pad_factor=config.pad_factor,
        kappa1=config.data_kappa1,
        sigma=config.smooth_sigma,
        window=config.smooth_window,
    )
    out = config.path("sweep_prep")
    write_sweep(out, truncated)
    _report(
        config,
        "preprocess",
        time.perf_counter() - t0,
        [
            ("z_target", -config.b),
            ("kappa1", config.data_kappa1),
            ("output", out),
        ],
    )
    return out


def run_invert(config: PipelineConfig):
    """Minimize the weighted residual from the data-driven start."""
    t0 = time.perf_counter()
    Path(config.outdir).mkdir(parents=True, exist_ok=True)
    prep = _require(config.path("sweep_prep"), "preprocess")
    sweep = read_sweep(prep)
    grid = _grid(config)
    sources = _sources(config)
    basis = build_basis(config.a1, config.a2, config.N)
    k = _wavenumber(config)

    data = cauchy_data(sweep, grid, sources, basis)
    v0 = starting_point(data.psi0, data.psi1, grid, basis)
    system = build_system(v0, sources, k, config.lam)
    schedule = DescentSchedule(
        gamma1=config.gamma1,
        gamma_min=config.gamma_min,
        dj_min=config.dj_min,
        max_steps=config.max_steps,
        mode=config.mode,
        M=config.ball_M,
        checkpoint_every=config.checkpoint_every,
        checkpoint_prefix=str(Path(config.outdir) / "checkpoint"),
    )
    result = minimize(
        system,
        v0.values,
        schedule,
        log_path=config.path("invert_log"),
        dump_path=str(Path(config.outdir) / "diverged_iterate.npy"),
    )
    out = config.path("lifted")
    write_lifted(
        out,
        LiftedField(
            values=result.values,
            psi0=data.psi0,
            psi1=data.psi1,
            grid=grid,
            basis=basis,
        ),
    )
    extra = [
        ("lambda", config.lam),
        ("steps", len(result.iterations) - 1),
        ("stop_reason", result.reason),
        ("J_final", f"{result.J:.17g}"),
        ("output", out),
    ]
    if config.lam == 0:
        extra.append(("weight", "mu == 1 (lambda = 0, degenerate weight)"))
    _report(config, "invert", time.perf_counter() - t0, extra)
    return out


def run_extract(config: PipelineConfig):
    """Recover c and sigma, post-process, classify, and export volumes."""
    t0 = time.perf_counter()
    Path(config.outdir).mkdir(parents=True, exist_ok=True)
    lifted_path = _require(config.path("lifted"), "invert")
    lifted = read_lifted(lifted_path)
    iterations = 0
    log = config.path("invert_log")
    if log.exists():
        with open(log) as fh:
            iterations = max(sum(1 for _ in fh) - 2, 0)  # header + step 0

    result = reconstruct(
        lifted,
        _sources(config),
        _wavenumber(config),
        lam=config.lam,
        iterations=iterations,
        kappa1=config.coef_kappa1,
        noise_delta=config.noise_delta if config.noise_delta > 0 else None,
        constants=_constants(config),
    )
    outdir = Path(config.outdir)
    prefix = config.volume_prefix
    volumes = [
        (result.c_comp, f"{prefix}_c_raw.vtk", "dielectric_raw"),
        (result.sigma_comp, f"{prefix}_sigma_raw.vtk", "conductivity_raw"),
        (result.c_post, f"{prefix}_c.vtk", "dielectric"),
        (result.sigma_post, f"{prefix}_sigma.vtk", "conductivity"),
    ]
    written = []
    for values, name, label in volumes:
        vol, _ = export_volume(
            values, lifted.grid, outdir / name, name=label,
            iso_fraction=config.iso_fraction,
        )
        written.append(vol)
    write_summary(result, outdir / "summary.txt", outdir / "summary.csv")
    _report(
        config,
        "extract",
        time.perf_counter() - t0,
        [
            ("max_c", f"{result.max_c:.17g}"),
            ("max_sigma", f"{result.max_sigma:.17g}"),
            ("conductive", result.conductive),
            ("volumes", "; ".join(str(w) for w in written)),
        ],
    )
    return result


def run_pipeline(config: PipelineConfig):
    """Chain the enabled stages in order."""
    result = None
    if config.do_simulate:
        run_simulate(config)
    if config.do_preprocess:
        run_preprocess(config)
    if config.do_invert:
        run_invert(config)
    if config.do_extract:
        result = run_extract(config)
    return result


_STAGES = {
    "simulate": run_simulate,
    "preprocess": run_preprocess,
    "invert": run_invert,
    "extract": run_extract,
    "pipeline": run_pipeline,
}


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="cwscat",
        description="Recover dielectric constant and conductivity from "
        "multi-source backscattering sweeps.",
    )
    sub = ap.add_subparsers(dest="stage", required=True)
    for name, fn in _STAGES.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("--config", default=None, help="INI configuration file")
        sp.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one configuration value (repeatable)",
        )
        sp.add_argument("--outdir", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="noise seed")
        sp.add_argument("--delta", type=float, default=None, help="noise level")
        sp.add_argument("--lam", type=float, default=None, help="weight exponent")
        sp.add_argument("--max-steps", type=int, default=None, help="descent cap")
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.outdir is not None:
        overrides.append(f"paths.outdir={args.outdir}")
    if args.seed is not None:
        overrides.append(f"noise.seed={args.seed}")
    if args.delta is not None:
        overrides.append(f"noise.delta={args.delta}")
    if args.lam is not None:
        overrides.append(f"inversion.lambda={args.lam}")
    if args.max_steps is not None:
        overrides.append(f"inversion.max_steps={args.max_steps}")
    try:
        config = load_config(args.config, overrides)
        _STAGES[args.stage](config)
    except (ConfigError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
