"""Command-line entry point: one subcommand per scenario.

Each run writes ``<out>/<scenario>.csv`` and ``<out>/manifest.txt``.  Floats
are printed with 17 significant digits, and complex values are split into
``_re`` and ``_im`` columns.  On any library error the process prints one
line of the form ``error category=<name>: <message>`` to stderr and exits
with a nonzero status.
"""

from __future__ import annotations

import argparse
import csv
import math
import platform
import sys
from time import perf_counter
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, _kernels
from .config import SCENARIOS, RunConfig, parse_config, serialize
from .errors import ConfigError, ContractError, RelpathError
from .experiments import ScanConfig, SlitConfig, double_slit, double_slit_with_environment, entropy_coupling_scan
from .entropy import eigen_entropy
from .history import ApparatusStage, run_chain
from .influence import (
    InfluenceFunctional,
    density_via_influence,
    influence_bruteforce,
    is_factorizable,
)
from .lattice import (
    PhysicalConstants,
    PotentialSpec,
    SpaceGrid,
    Subsystem,
    TimeGrid,
    bilinear_coupling,
    constant_potential,
    contact_coupling,
    enumerate_paths,
    gaussian_packet,
    harmonic_potential,
    linear_source,
)
from .propagator import propagate, short_time_kernel, spectral_step_operator
from .relational import pure_density

EXIT_CODES = {"config": 2, "domain": 3, "contract": 4, "refusal": 5, "degenerate": 6, "error": 1}

Table = Tuple[List[str], List[List[Any]], Dict[str, Any]]


# -- builders ---------------------------------------------------------------

def _band_limit(cfg: RunConfig) -> Optional[bool]:
    return {"auto": None, "on": True, "off": False}[cfg.get("scenario", "band_limit")]


def _consts(cfg: RunConfig) -> PhysicalConstants:
    return PhysicalConstants(cfg.get("constants", "hbar"), cfg.get("constants", "mass"))


def _grid(block) -> SpaceGrid:
    return SpaceGrid(block["x_min"], block["x_max"], block["n_points"])


def _time(cfg: RunConfig) -> TimeGrid:
    t = cfg.section("time")
    return TimeGrid(t["t_start"], t["t_end"], t["n_steps"])


def _potential(cfg: RunConfig) -> PotentialSpec:
    p = cfg.section("potential")
    if p["kind"] == "constant":
        return constant_potential(p["value"])
    if p["kind"] == "harmonic":
        return harmonic_potential(p["omega"], cfg.get("constants", "mass"))
    return PotentialSpec()


def _system(cfg: RunConfig) -> Subsystem:
    return Subsystem(_grid(cfg.section("grid")), _potential(cfg), _consts(cfg))


def _apparatus(cfg: RunConfig) -> Subsystem:
    env = cfg.section("environment")
    return Subsystem(_grid(env), PotentialSpec(), PhysicalConstants(cfg.get("constants", "hbar"), env["mass"]))


def _apparatus_state(cfg: RunConfig, grid: SpaceGrid) -> np.ndarray:
    env = cfg.section("environment")
    if env["initial"] == "gaussian":
        return gaussian_packet(grid, env["center"], env["spread"])
    if env["initial"] == "delta":
        psi = np.zeros(grid.n_points, dtype=complex)
        psi[grid.nearest_index(env["center"])] = 1.0
        return psi
    return np.ones(grid.n_points, dtype=complex)


def _coupling(cfg: RunConfig, strength: Optional[float] = None) -> PotentialSpec:
    env = cfg.section("environment")
    lam = env["strength"] if strength is None else strength
    if env["coupling"] == "contact":
        return contact_coupling(lam, env["width"])
    if env["coupling"] == "source":
        return linear_source(lam, env["omega"])
    return bilinear_coupling(lam)


def _stage(cfg: RunConfig, window: TimeGrid) -> ApparatusStage:
    app = _apparatus(cfg)
    return ApparatusStage.build(app, _coupling(cfg), window, _apparatus_state(cfg, app.grid))


def _slits(cfg: RunConfig) -> SlitConfig:
    s, t = cfg.section("slits"), cfg.section("time")
    return SlitConfig(s["x1"], s["x2"], (s["w1"], s["w2"]), t["t_end"] - t["t_start"],
                      _grid(cfg.section("grid")), t["n_steps"], cfg.mode, _potential(cfg), _consts(cfg))


def _step_operator(body: Subsystem, time: TimeGrid, cfg: RunConfig) -> np.ndarray:
    if cfg.mode == "spectral":
        return spectral_step_operator(body.grid, time.eps, body.potential, body.consts, cfg.eta)
    return short_time_kernel(body.grid, time.eps, body.potential, body.consts, cfg.eta, _band_limit(cfg)).operator


# -- scenarios --------------------------------------------------------------

def run_propagate(cfg: RunConfig) -> Table:
    sysm = _system(cfg)
    ini = cfg.section("initial")
    psi0 = gaussian_packet(sysm.grid, ini["center"], ini["width"], ini["momentum"], sysm.consts.hbar)
    psi = propagate(psi0, sysm.grid, _time(cfg), sysm.potential, sysm.consts, cfg.mode, cfg.eta, _band_limit(cfg))
    dx = sysm.grid.dx
    rows = [[x, v.real, v.imag, abs(v) ** 2 * dx] for x, v in zip(sysm.grid.points, psi)]
    return ["x", "psi_re", "psi_im", "probability"], rows, {"norm": math.sqrt(np.sum(np.abs(psi) ** 2) * dx)}


def run_double_slit(cfg: RunConfig) -> Table:
    r = double_slit(_slits(cfg))
    rows = [list(v) for v in zip(r.x, r.p_coherent, r.p_whichpath, r.cross_term)]
    return ["x", "p_coherent", "p_whichpath", "cross_term"], rows, {
        "integral_coherent": float(r.p_coherent.sum()), "integral_whichpath": float(r.p_whichpath.sum())}


def run_which_path(cfg: RunConfig) -> Table:
    from .experiments import slit_density

    sc = _slits(cfg)
    r = double_slit(sc)
    rows = [[x, p, a.real, a.imag, b.real, b.imag]
            for x, p, a, b in zip(r.x, r.p_whichpath, r.phi1, r.phi2)]
    h = eigen_entropy(slit_density(sc, coherent=False)).von_neumann
    return ["x", "p_whichpath", "phi1_re", "phi1_im", "phi2_re", "phi2_im"], rows, {"slit_state_entropy": h}


def run_environment(cfg: RunConfig) -> Table:
    sc = _slits(cfg)
    res = double_slit_with_environment(sc, _stage(cfg, TimeGrid(0.0, sc.T, sc.n_steps)), _band_limit(cfg))
    rows = [list(v) for v in zip(res.x, res.probability, res.direct, res.interference)]
    rep = res.report
    return ["x", "probability", "direct", "interference"], rows, {
        "H_eigen": rep.von_neumann, "H_replica": rep.replica_extrapolated, "purity": rep.purity,
        "interference_norm": res.interference_norm}


def run_entropy_scan(cfg: RunConfig) -> Table:
    app = _apparatus(cfg)
    env = cfg.section("environment")
    scan = ScanConfig(cfg.get("scan", "couplings"), _slits(cfg), app,
                      tuple(_apparatus_state(cfg, app.grid)), env["coupling"], env["width"], env["omega"],
                      cfg.get("scan", "route"))
    rows = [[r.coupling, r.H_eigen, r.H_replica, r.purity, r.interference_norm] for r in entropy_coupling_scan(scan)]
    return ["coupling", "H_eigen", "H_replica", "purity", "interference_norm"], rows, {}


def run_history(cfg: RunConfig) -> Table:
    sysm = _system(cfg)
    ini = cfg.section("initial")
    rho0 = pure_density(gaussian_packet(sysm.grid, ini["center"], ini["width"], ini["momentum"],
                                        sysm.consts.hbar), sysm.grid)
    time = _time(cfg)
    n = cfg.get("history", "n_stages")
    per = time.n_steps // n if n else 0
    stages = []
    for k in range(n):
        t0 = time.t_start + k * per * time.eps
        stages.append(_stage(cfg, TimeGrid(t0, t0 + per * time.eps, per)))
    out = run_chain(rho0, stages, sysm, cfg.mode, cfg.eta, _band_limit(cfg))
    rows = []
    for k, rho in enumerate(out):
        rep = eigen_entropy(rho)
        t_end = time.t_start if k == 0 else stages[k - 1].window.t_end
        rows.append([k, t_end, rho.trace.real, rep.von_neumann, rep.replica_extrapolated, rep.purity])
    return ["stage", "t_end", "trace", "H_eigen", "H_replica", "purity"], rows, {}


def run_influence_check(cfg: RunConfig) -> Table:
    rng = np.random.default_rng(cfg.seed)
    sysm = _system(cfg)
    time = _time(cfg)
    paths = enumerate_paths(sysm.grid, time)
    psi = rng.normal(size=sysm.grid.n_points) + 1j * rng.normal(size=sysm.grid.n_points)
    rho0 = pure_density(psi, sysm.grid)
    step = _step_operator(sysm, time, cfg)
    app = _apparatus(cfg)
    app_step = _step_operator(app, time, cfg)
    inf = cfg.section("influence")
    g = inf["g_amplitude"] * rng.normal(size=time.n_steps)
    alpha = np.tril(np.full((time.n_steps, time.n_steps), complex(inf["alpha_re"], inf["alpha_im"])), -1)
    init = _apparatus_state(cfg, app.grid)
    functionals = [
        ("none", influence_bruteforce(ApparatusStage.build(app, PotentialSpec(), time, init), paths, sysm, app_step)),
        ("linear", InfluenceFunctional("linear", sysm.grid, time, paths, g_samples=g, hbar=sysm.consts.hbar)),
        ("gaussian", InfluenceFunctional("gaussian", sysm.grid, time, paths, alpha=alpha)),
        ("bruteforce", influence_bruteforce(ApparatusStage.build(app, _coupling(cfg), time, init), paths, sysm,
                                            app_step)),
    ]
    rows = []
    for name, F in functionals:
        fz = is_factorizable(F)
        rho = density_via_influence(rho0, F, sysm, step)
        lam_min = float(rho.eigenvalues()[-1])
        try:
            rep = eigen_entropy(rho, replica=False)
            h, purity = rep.von_neumann, rep.purity
        except ContractError:
            # closed forms need not give a positive density for every input
            h, purity = math.nan, math.nan
        rows.append([name, int(fz.factorizable), fz.ratio, F.exchange_error(), lam_min, h, purity])
    return ["variant", "factorizable", "sv_ratio", "exchange_error", "min_eigenvalue", "H_eigen", "purity"], rows, {
        "n_paths": len(paths)}


RUNNERS = {
    "propagate": run_propagate,
    "double-slit": run_double_slit,
    "which-path": run_which_path,
    "environment": run_environment,
    "entropy-scan": run_entropy_scan,
    "history": run_history,
    "influence-check": run_influence_check,
}


# -- output -----------------------------------------------------------------

def format_cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % (float(v) + 0.0)  # folds -0.0 into 0
    if isinstance(v, (complex, np.complexfloating)):
        raise TypeError("complex values must be split into real/imag columns")
    return str(v)


def write_table(path: Path, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def write_manifest(path: Path, cfg: RunConfig, summary: Dict[str, Any], seconds: float, table: str) -> None:
    import numba

    lines = [
        f"scenario: {cfg.scenario}",
        f"table: {table}",
        f"relpath: {__version__}",
        f"python: {platform.python_version()}",
        f"numpy: {np.__version__}",
        f"numba: {numba.__version__}",
        f"kernel_backend: {_kernels.backend()}",
        f"elapsed_seconds: {seconds:.6f}",
    ]
    lines += [f"result.{k}: {format_cell(v)}" for k, v in summary.items()]
    lines += ["", "# effective configuration", serialize(cfg)]
    path.write_text("\n".join(lines), encoding="utf-8")


def run(cfg: RunConfig, out_dir: Optional[Path] = None) -> Path:
    """Execute the scenario and write its table and manifest; returns the table path."""
    out = Path(out_dir if out_dir is not None else cfg.get("scenario", "out"))
    out.mkdir(parents=True, exist_ok=True)
    start = perf_counter()
    columns, rows, summary = RUNNERS[cfg.scenario](cfg)
    elapsed = perf_counter() - start
    table = out / f"{cfg.scenario}.csv"
    write_table(table, columns, rows)
    write_manifest(out / "manifest.txt", cfg, summary, elapsed, table.name)
    return table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relpath", description="Lattice relational path-integral simulator.")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", required=True, type=Path, help="config file path")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides [scenario] out)")
        p.add_argument("--mode", choices=("kernel", "spectral"), default=None, help="propagation mode")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized inputs (default 42)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}: {args.config}") from None
        cfg = parse_config(text, args.scenario)
        overrides = {}
        if args.mode is not None:
            overrides["mode"] = args.mode
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = str(args.out)
        if overrides:
            cfg = cfg.replace("scenario", **overrides)
        table = run(cfg)
    except RelpathError as exc:
        msg = " ".join(str(exc).split())
        print(f"error category={exc.category}: {msg}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    print(table)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
