"""Command line: ``pkslab {evolve,stationary,sweep-evolve,sweep-stationary,validate}``.

Exit codes: 0 ok, 1 a run failed or a check did not pass, 2 usage error.
The output root can be moved with the PKSLAB_OUTPUT_ROOT environment variable.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .evolve import SolverError
from .radial import DensityField, density_profile, make_grid
from .records import RunManifest, dump_json, write_profile, write_series, write_sweep
from .stationary import (ShootingError, alpha_bound, limit_radius, resample, rstar_bound,
                         sampled_pressure, solve_for_mass, uv_trajectory)
from .sweep import (BumpData, EvolutionSweepConfig, patch_density, run_evolution_sweep,
                    run_one, run_stationary_sweep, uniqueness_probe)
from .validate import format_table, run_battery

logger = logging.getLogger("pkslab")

OUTPUT_ROOT_ENV = "PKSLAB_OUTPUT_ROOT"
MASS_RTOL = 1e-10
CLIP_RTOL = 1e-8


def run_dir(cfg: RunConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "."))
    return root / cfg.output_dir / cfg.mode


def initial_density(cfg: RunConfig, grid, m: float) -> DensityField:
    init = cfg.initial
    if init["preset"] == "bump":
        return density_profile(grid, BumpData(init["amplitude"], init["radius"]))
    if init["preset"] == "patch":
        return patch_density(init["radius"], grid)
    return resample(solve_for_mass(init["mass"], m, grid.n_dim), grid)


def perturbed(rho: DensityField, size: float, seed: int) -> DensityField:
    """Multiplicative radial noise on the support, rescaled to the original mass."""
    rng = np.random.default_rng(seed)
    vals = rho.values * (1 + size * rng.uniform(-1, 1, rho.values.size))
    out = DensityField(rho.grid, vals)
    return out.scaled(rho.mass / out.mass)


def _audit_ok(initial, final, clipped) -> bool:
    return abs(final - initial) <= MASS_RTOL * initial and clipped <= CLIP_RTOL * initial


def cmd_evolve(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    grid = make_grid(cfg.n_dim, cfg.r_max, cfg.cells)
    rho0 = initial_density(cfg, grid, cfg.m)
    run = run_one(rho0, cfg.m, cfg.t_end, cfg.snapshots, support_tol=cfg.support_tol,
                  cfl_diffusion=cfg.cfl_diffusion, cfl_advection=cfg.cfl_advection)
    write_series(run.reports, out / "series.csv")
    ok = _audit_ok(run.audit.initial_mass, run.final.mass, run.audit.clipped_mass)
    manifest.record(f"m={cfg.m:g}", "ok" if ok else "conservation audit failed",
                    initial_mass=run.audit.initial_mass, final_mass=run.final.mass,
                    clipped_mass=run.audit.clipped_mass, steps=run.audit.steps)
    if cfg.perturbation > 0:
        series, flag = uniqueness_probe(rho0, perturbed(rho0, cfg.perturbation, cfg.seed),
                                        cfg.m, cfg.t_end, cfg.snapshots)
        t, d = zip(*series)
        write_profile(out / "probe.csv", t, {"h_minus_one": d})
        manifest.record("uniqueness probe", "red flag" if flag else "ok")
        ok &= not flag
    return 0 if ok else 1


def cmd_stationary(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    grid = make_grid(cfg.n_dim, cfg.r_max, cfg.cells)
    prof = solve_for_mass(cfg.mass, cfg.m, cfg.n_dim)
    rho = resample(prof, grid)
    write_profile(out / "profile.csv", grid.centers,
                  {"rho": rho.values, "pressure": sampled_pressure(prof, grid).values})
    a_max, apow = alpha_bound(cfg.mass, cfg.n_dim)
    checks = {
        "mass": abs(prof.mass - cfg.mass) <= 1e-8 * cfg.mass,
        "alpha": prof.alpha <= a_max,
        "alpha_pow": prof.alpha ** (cfg.m - 1) <= apow,
        "uv_flags": uv_trajectory(prof).all_flags,
        "support": prof.support_radius <= rstar_bound(cfg.mass, cfg.n_dim),
    }
    dump_json({"alpha": prof.alpha, "support_radius": prof.support_radius, "mass": prof.mass,
               "alpha_bound": [a_max, apow], "rstar": rstar_bound(cfg.mass, cfg.n_dim),
               "limit_radius": limit_radius(cfg.mass, cfg.n_dim), "checks": checks},
              out / "summary.json")
    ok = all(checks.values())
    manifest.record(f"m={cfg.m:g}", "ok" if ok else "bound check failed",
                    mass=prof.mass, grid_mass=rho.mass)
    return 0 if ok else 1


def cmd_sweep_evolve(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    base = EvolutionSweepConfig(n_dim=cfg.n_dim, r_max=cfg.r_max, cells=cfg.cells,
                                snapshots=cfg.snapshots, support_tol=cfg.support_tol,
                                cfl_diffusion=cfg.cfl_diffusion, cfl_advection=cfg.cfl_advection)
    rho0 = initial_density(cfg, base.grid(), cfg.m_values[0])
    result = run_evolution_sweep(base, cfg.m_values, cfg.t_end, rho0)
    write_sweep(result, out)
    ok = True
    for m in result.m_values:
        run = result.per_m[m]
        if run.failure:
            manifest.record(f"m={m:g}", run.failure)
            ok = False
            continue
        good = _audit_ok(run.audit.initial_mass, run.final.mass, run.audit.clipped_mass)
        manifest.record(f"m={m:g}", "ok" if good else "conservation audit failed",
                        initial_mass=run.audit.initial_mass, final_mass=run.final.mass,
                        clipped_mass=run.audit.clipped_mass, steps=run.audit.steps)
        ok &= good
    return 0 if ok else 1


def cmd_sweep_stationary(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    result = run_stationary_sweep(cfg.mass, cfg.n_dim, cfg.m_values, cells=cfg.cells,
                                  r_max=cfg.r_max)
    write_sweep(result, out)
    ok = True
    for m, s in result.per_m.items():
        good = s.alpha_ok and s.alpha_pow_ok and s.uv_ok and s.support_ok
        manifest.record(f"m={m:g}", "ok" if good else "bound check failed", mass=s.mass)
        ok &= good
    return 0 if ok else 1


def cmd_validate(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    checks = run_battery()
    print(format_table(checks))
    for c in checks:
        manifest.record(c.name, "ok" if c.passed else f"failed: {c.detail}")
    return 0 if all(c.passed for c in checks) else 1


COMMANDS = {
    "evolve": cmd_evolve,
    "stationary": cmd_stationary,
    "sweep-evolve": cmd_sweep_evolve,
    "sweep-stationary": cmd_sweep_stationary,
    "validate": cmd_validate,
}


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pkslab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="mode", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON run configuration")
        p.add_argument("--out", dest="output_dir", help="run directory below the output root")
        if name == "validate":
            continue
        p.add_argument("--n-dim", type=int)
        p.add_argument("--cells", type=int)
        p.add_argument("--r-max", type=float)
        if name in ("evolve", "stationary"):
            p.add_argument("--m", type=float)
        else:
            p.add_argument("--m-values", type=_floats, help="e.g. 8,16,32,64")
        if name.endswith("stationary"):
            p.add_argument("--mass", type=float)
        else:
            p.add_argument("--t-end", type=float)
            p.add_argument("--snapshots", type=int)
            p.add_argument("--preset", choices=("bump", "patch", "stationary"))
            p.add_argument("--amplitude", type=float)
            p.add_argument("--radius", type=float)
        if name == "evolve":
            p.add_argument("--perturbation", type=float,
                           help="relative noise for the uniqueness probe (0 = off)")
            p.add_argument("--seed", type=int)
    return parser


def _overrides(args) -> dict:
    skip = {"config", "verbose", "preset", "amplitude", "radius"}
    ov = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    initial = {k: getattr(args, k, None) for k in ("preset", "amplitude", "radius")}
    if any(v is not None for v in initial.values()):
        ov["initial"] = {k: v for k, v in initial.items() if v is not None}
    return ov


def _merge_initial(cfg_path, ov):
    """Flag overrides for the initial data patch the file's mapping rather than replace it."""
    if "initial" not in ov or cfg_path is None:
        return ov
    import yaml

    raw = yaml.safe_load(Path(cfg_path).read_text()) or {}
    base = raw.get("initial") or {}
    if isinstance(base, str):
        base = {"preset": base}
    if "preset" in ov["initial"] and ov["initial"]["preset"] != base.get("preset"):
        base = {}
    ov["initial"] = {**base, **ov["initial"]}
    return ov


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        ov = _merge_initial(args.config, _overrides(args))
        cfg = load_config(args.config, ov)
    except (ConfigError, OSError) as exc:
        print(f"pkslab: error: {exc}", file=sys.stderr)
        return 2

    out = run_dir(cfg)
    manifest = RunManifest(cfg.as_dict())
    code = 1
    try:
        code = COMMANDS[cfg.mode](cfg, out, manifest)
    except (SolverError, ShootingError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        manifest.record("run", f"failed: {type(exc).__name__}: {exc}")
    except BaseException as exc:
        manifest.record("run", f"crashed: {type(exc).__name__}: {exc}")
        raise
    finally:
        path = manifest.write(out)
        logger.info("manifest written to %s", path)
    return code


if __name__ == "__main__":
    sys.exit(main())
