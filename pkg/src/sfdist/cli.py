"""Single command-line entry point for all computation routes.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 cross-validation tolerance exceeded.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, fock, pimc, quasiparticle, rtqc, validate
from . import cmps as cmps_mod
from .config import RunConfig, load_config, method_section
from .domain import NormalFluidField, eval_gradient_term
from .errors import ConfigError, ToleranceError, ToolkitError
from .stateio import load_cmps, load_state


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default))


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(cfg: RunConfig, outdir: Path, t0: float,
                    warnings: list, outputs: list, extra: dict) -> Path:
    manifest = {
        "schema": "sfdist-manifest-1",
        "subcommand": cfg.subcommand,
        "config": cfg.sections,
        "seed": cfg.seed,
        "versions": {
            "sfdist": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": round(time.time() - t0, 3),
        "warnings": warnings,
        "outputs": [str(p) for p in outputs],
    }
    manifest.update(extra)
    path = outdir / f"{cfg.subcommand}_manifest.json"
    _dump_json(path, manifest)
    return path


def _parse_components(text: str | None, dim: int) -> list:
    if text is None:
        return [(i, i) for i in range(dim)]
    pairs = []
    for chunk in text.split():
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"components: expected i,j pairs, got {chunk!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < dim and 0 <= j < dim):
            raise ConfigError(f"components: axis out of range in {chunk!r}")
        pairs.append((i, j))
    return pairs


def _run_oracle(cfg: RunConfig) -> tuple[list, dict]:
    sec = method_section(cfg)
    n = sec.int("n_particles")
    mass = sec.float("mass", 1.0)
    builder = sec.get("state", "k0_bec")
    space = fock.FockSpace(cfg.domain, n)
    if builder == "k0_bec":
        state = fock.build_k0_bec(space)
    elif builder == "strong_sf":
        state = fock.build_strong_sf(space, cfg.velocity_field, mass,
                                     range(cfg.domain.nsites))
    else:
        raise ConfigError(f"[oracle] unknown state builder {builder!r}")
    d = cfg.domain.dim
    tensor = np.full((cfg.domain.nsites, d, d), np.nan)
    warnings: list = []
    rho = None
    for i, j in _parse_components(sec.get("components"), d):
        nf = fock.local_normal_tensor(state, cfg.velocity_field, mass, i, j)
        tensor[:, i, j] = nf.tensor[:, i, j]
        rho = nf.rho
        for w in nf.warnings:
            if w not in warnings:
                warnings.append(w)
    combined = NormalFluidField(cfg.domain, rho, tensor, "fock-oracle",
                                warnings=warnings)
    combined.flag_negative_superfluid()
    outdir = _outdir(cfg)
    csv = outdir / "oracle.csv"
    combined.to_csv(csv)
    return [csv], {"warnings_out": combined.warnings}


def _run_bec(cfg: RunConfig) -> tuple[list, dict]:
    sec = method_section(cfg)
    n = sec.int("n_particles")
    mass = sec.float("mass", 1.0)
    dom, vf = cfg.domain, cfg.velocity_field
    d = dom.dim
    pos = dom.positions()
    tensor = np.full((dom.nsites, d, d), np.nan)
    for s in range(dom.nsites):
        if vf.is_singular(pos[s]):
            continue
        for i in range(d):
            for j in range(d):
                try:
                    tensor[s, i, j] = fock.bec_closed_form(
                        vf, n, mass, dom, i, j, pos[s])
                except ToolkitError:
                    pass  # v_j = 0 with a nonvanishing gradient: leave masked
    rho = np.full(dom.nsites, n * mass / dom.volume())
    nf = NormalFluidField(dom, rho, tensor, "bec-closed-form")
    nf.flag_negative_superfluid()
    outdir = _outdir(cfg)
    csv = outdir / "bec.csv"
    nf.to_csv(csv)
    return [csv], {"warnings_out": nf.warnings}


def _run_quasiparticle(cfg: RunConfig) -> tuple[list, dict]:
    sec = method_section(cfg)
    dim = sec.int("dimension")
    lengths = sec.floats("lengths")
    if len(lengths) != dim:
        raise ConfigError("[quasiparticle] lengths must match dimension")
    params = sec.floats("params", ())
    dispersion = sec.get("dispersion")
    if dispersion == "phonon":
        sp = {"c": params[0]} if params else {}
    elif dispersion == "free":
        sp = {"mass": params[0]} if params else {}
    else:
        raise ConfigError("[quasiparticle] tabulated dispersions need the "
                          "library interface, not the CLI")
    spec = quasiparticle.QuasiparticleSpectrum(
        dim, tuple(lengths), sec.float("kmax"), dispersion, sp)
    beta = sec.float("beta")
    tensor = [[quasiparticle.landau_normal_tensor(spec, beta, i, j)
               for j in range(dim)] for i in range(dim)]
    record = {
        "rho_n_tensor": tensor,
        "critical_velocity": quasiparticle.critical_velocity(spec),
        "beta": beta,
        "grid": {"lengths": list(lengths), "kmax": sec.float("kmax"),
                 "n_modes": int(len(spec.momenta))},
    }
    vel = sec.floats("velocity")
    if vel is not None:
        g = quasiparticle.BoostedGibbs(spec, beta, np.asarray(vel))
        record["momentum_density"] = list(
            quasiparticle.momentum_density_gibbs(g))
    outdir = _outdir(cfg)
    path = outdir / "quasiparticle.json"
    _dump_json(path, record)
    return [path], {}


def _run_pimc(cfg: RunConfig, args) -> tuple[list, dict]:
    sec = method_section(cfg)
    params = pimc.PIMCParams(
        n_particles=sec.int("n_particles"),
        domain=cfg.domain,
        mass=sec.float("mass", 1.0),
        beta=sec.float("beta"),
        n_slices=sec.int("n_slices"),
        potential=sec.get("potential", "none"),
        g=sec.float("g", 0.0),
        w=sec.float("w", 0.5),
        staging_length=sec.int("staging_length", 8),
        cycle_length=sec.int("cycle_length", 2),
        sweeps=args.sweeps or sec.int("sweeps"),
        thermalization=sec.int("thermalization", 1000),
        seed=cfg.seed,
        n_bins=sec.int("n_bins", 16),
    )
    i = sec.int("i", 0)
    j = sec.int("j", 0)
    chains = args.chains or sec.int("chains", 1)
    acc, rates = pimc.run_chains(
        params, cfg.velocity_field, i, j, n_chains=chains,
        measure_every=sec.int("measure_every", 1),
        enable_permutations=sec.bool("enable_permutations", True),
        block_size=sec.int("block_size", 500),
        max_workers=cfg.threads)
    nf = acc.finalize(cfg.velocity_field)
    nf.flag_negative_superfluid()

    # slow-variation monitor: heterogeneity of |grad(v_j x_j)| over bins
    centers = acc.bin_centers[0] if cfg.domain.dim == 1 else None
    warnings = list(nf.warnings)
    if centers is not None:
        g_abs = [abs(eval_gradient_term(cfg.velocity_field, j, j,
                                        np.array([c]))) for c in centers]
        spread = max(g_abs) - min(g_abs)
        warnings.append(
            f"slow-variation monitor: max|grad(v_j x_j)| spread {spread:.3e}"
            f" over bins (validity assumes this is small)")
    extra = {
        "acceptance_rates": rates,
        "n_samples": acc.n_samples,
        "n_blocks": len(acc.block_dsq),
        "warnings_out": warnings,
    }
    if cfg.velocity_field.family == "constant" and len(acc.block_dsq) >= 2:
        val, err = pimc.superfluid_fraction_constant_v(acc)
        extra["superfluid_fraction"] = {"value": val, "stderr": err}
    outdir = _outdir(cfg)
    csv = outdir / "pimc.csv"
    nf.to_csv(csv)
    return [csv], extra


def _run_cmps(cfg: RunConfig) -> tuple[list, dict]:
    sec = method_section(cfg)
    state_file = sec.get("state_file")
    if state_file:
        state = load_cmps(state_file)
    else:
        length = sec.float("length")
        bond_dim = sec.int("bond_dim")
        if length is None or bond_dim is None:
            raise ConfigError(
                "[cmps] needs either state_file or length + bond_dim")
        state = cmps_mod.CMPS.random_fourier(
            length, bond_dim, seed=sec.int("state_seed", cfg.seed),
            n_modes=sec.int("n_modes", 2), scale=sec.float("scale", 0.5),
            real=True, with_q=sec.bool("with_q", False))
    vf = cfg.velocity_field
    if vf.family == "tabulated":
        raise ConfigError("[cmps] tabulated fields are not supported; "
                          "use an analytic family")
    mass = sec.float("mass", 1.0)
    tol = sec.float("tol", 1e-10)
    points = sec.int("points", 33)
    # midpoints, so finite-difference stencils never step outside the box
    step = state.length / points
    xs = state.x_left + (np.arange(points) + 0.5) * step
    rows = []
    checked = False
    for x in xs:
        xv = np.array([x])
        if vf.is_singular(xv) or float(vf.eval(xv)[0]) == 0.0:
            continue
        rho, rho_n = cmps_mod.normal_fluid_1d(state, vf, mass, float(x), tol,
                                              check_intrinsic=not checked)
        checked = True
        rows.append((float(x), rho, rho_n))
    outdir = _outdir(cfg)
    csv = outdir / "cmps.csv"
    with open(csv, "w") as fh:
        fh.write("x1,i,j,rho,rho_n,stderr\n")
        for x, rho, rho_n in rows:
            fh.write(f"{x:.12g},0,0,{rho:.12g},{rho_n:.12g},0\n")
    return [csv], {"points_evaluated": len(rows),
                   "bond_dim": state.bond_dim}


def _run_rtqc(cfg: RunConfig) -> tuple[list, dict]:
    sec = method_section(cfg)
    state = load_state(sec.get("state_file"))
    region = sec.ints("region")
    n_region = sec.int("n_region")
    mode = sec.get("mode", "tuple")
    rep = rtqc.coherence(rtqc.marginal_state(state, region, n_region, mode))
    record = {
        "region": list(region),
        "n_region": n_region,
        "mode": rep.mode,
        "coherence_bits": rep.c_bits,
        "entropy_state_bits": rep.entropy_state,
        "entropy_decohered_bits": rep.entropy_decohered,
        "distillation_rate_bound": rep.rate_bound,
    }
    outdir = _outdir(cfg)
    path = outdir / "rtqc.json"
    _dump_json(path, record)
    return [path], {}


def _run_validate(cfg: RunConfig, names) -> tuple[list, dict, int]:
    reports, status = validate.run_all(names or None)
    for r in reports:
        print(r.line())
    record = [{"name": r.name, "passed": bool(r.passed),
               "max_discrepancy": float(r.max_discrepancy),
               "tolerance": float(r.tolerance),
               "elapsed_s": round(r.elapsed, 2),
               "details": [str(d) for d in r.details]} for r in reports]
    outdir = _outdir(cfg)
    path = outdir / "validate.json"
    _dump_json(path, record)
    return [path], {"scenarios_passed": sum(r.passed for r in reports),
                    "scenarios_total": len(reports)}, status


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sfdist",
        description="Spatial normal/superfluid density toolkit "
                    "(natural units, hbar = k_B = 1)")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--output", help="override [run] output directory")
    common.add_argument("--threads", type=int, help="cap worker count")
    for name, hlp in (
        ("oracle", "exact Fock-space normal tensor on a small grid"),
        ("bec", "closed-form condensate normal tensor on a grid"),
        ("quasiparticle", "Landau normal tensor of a quasiparticle gas"),
        ("pimc", "winding-number path-integral Monte Carlo"),
        ("cmps", "continuous matrix product state engine (1-d)"),
        ("rtqc", "coherence / distillation report for a saved state"),
    ):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("config", help="INI configuration file")
        if name == "pimc":
            sp.add_argument("--chains", type=int,
                            help="override [pimc] chains")
            sp.add_argument("--sweeps", type=int,
                            help="override [pimc] sweeps")
    vp = sub.add_parser("validate", parents=[common],
                        help="run the bundled cross-validation suite")
    vp.add_argument("config", nargs="?", help="optional INI configuration")
    vp.add_argument("--scenario", action="append", default=[],
                    choices=sorted(validate.SCENARIOS),
                    help="run only the named scenario (repeatable)")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    t0 = time.time()
    try:
        if args.subcommand == "validate" and args.config is None:
            cfg = RunConfig("validate", {})
        else:
            cfg = load_config(args.config, args.subcommand)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.output is not None:
            cfg.output = args.output
        if args.threads is not None:
            cfg.threads = args.threads

        status = 0
        if args.subcommand == "validate":
            names = args.scenario or (
                cfg.method.get("scenarios", "").split() or None
                if cfg.method else None)
            outputs, extra, status = _run_validate(cfg, names)
        elif args.subcommand == "oracle":
            outputs, extra = _run_oracle(cfg)
        elif args.subcommand == "bec":
            outputs, extra = _run_bec(cfg)
        elif args.subcommand == "quasiparticle":
            outputs, extra = _run_quasiparticle(cfg)
        elif args.subcommand == "pimc":
            outputs, extra = _run_pimc(cfg, args)
        elif args.subcommand == "cmps":
            outputs, extra = _run_cmps(cfg)
        elif args.subcommand == "rtqc":
            outputs, extra = _run_rtqc(cfg)
        manifest = _write_manifest(cfg, _outdir(cfg), t0,
                                   extra.pop("warnings_out", []),
                                   outputs, extra)
        for p in outputs + [manifest]:
            print(f"wrote {p}")
        return status
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ToleranceError as exc:
        print(f"tolerance exceeded: {exc}", file=sys.stderr)
        return 4
    except (ToolkitError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
