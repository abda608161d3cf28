"""Command line driver: JSON config in, manifest plus CSV/JSONL out.

Subcommands mirror the library modules (lattice, simulate, malliavin,
quadvar, control, bracket). A run writes its result tables plus a
manifest.json echoing the config verbatim; result tables are byte-identical
under a fixed (config, seed) pair. Malformed or schema-violating configs
exit with status 2 before any artifact is written.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import ForcingGeometry, is_generating, reachable_modes
from .malliavin import (bracket_decomposition, min_eigenvalue_tail,
                        pairing_rhs, PAIRING_PREFACTOR)
from .modes import is_plus
from .quadvar import (event_frequencies, partition_scheme,
                      sample_wiener_ensemble)
from .simulate import SimConfig, enstrophy_residual, simulate
from .spectral import SpectralField


class ConfigError(Exception):
    """Invalid configuration; message is path-addressed."""


def _fail(path, message):
    raise ConfigError(f"{path}: {message}")


def _check_keys(block, path, required, optional=()):
    if not isinstance(block, dict):
        _fail(path, "expected an object")
    for key in block:
        if key not in required and key not in optional:
            _fail(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in block:
            _fail(f"{path}.{key}", "missing required key")


def _check_number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    if positive and value <= 0:
        _fail(path, "must be positive")
    return float(value)


def _check_mode_list(value, path):
    if not isinstance(value, list) or not value:
        _fail(path, "expected a non-empty list of [kx, ky] pairs")
    out = []
    for i, item in enumerate(value):
        if (not isinstance(item, list) or len(item) != 2
                or not all(isinstance(c, int) and not isinstance(c, bool)
                           for c in item)):
            _fail(f"{path}[{i}]", "expected a pair of integers")
        if tuple(item) == (0, 0):
            _fail(f"{path}[{i}]", "the zero mode is excluded")
        out.append(tuple(item))
    return out


_ANALYSIS_SCHEMAS = {
    "lattice": ((), ()),
    "simulate": ((), ("n_paths",)),
    "malliavin": (("subspace", "t"), ("n_paths", "epsilons")),
    "quadvar": (("delta_cap",), ("horizon", "n_processes", "n_paths")),
    "control": (("projection", "target", "t"), ("s", "max_iters", "tol")),
    "bracket": (("phi_mode", "t0", "t1"), ()),
}

KINDS = tuple(sorted(_ANALYSIS_SCHEMAS))


def parse_config(raw: dict) -> dict:
    """Validate a raw JSON config; returns it with parsed helper objects."""
    _check_keys(raw, "config", ("kind", "sim"), ("analysis", "out"))
    kind = raw["kind"]
    if kind not in KINDS:
        _fail("config.kind", f"must be one of {', '.join(KINDS)}")
    sim = raw["sim"]
    _check_keys(sim, "sim", ("nu", "forcing"),
                ("radius", "dt", "t_final", "initial", "seed"))
    nu = _check_number(sim["nu"], "sim.nu", positive=True)
    forcing = _check_mode_list(sim["forcing"], "sim.forcing") \
        if sim["forcing"] != [] else []
    if sim["forcing"] == [] and kind != "simulate":
        _fail("sim.forcing", "must be non-empty for this experiment kind")
    radius = _check_number(sim.get("radius", 6.0), "sim.radius", positive=True)
    dt = _check_number(sim.get("dt", 1e-3), "sim.dt", positive=True)
    t_final = _check_number(sim.get("t_final", 1.0), "sim.t_final",
                            positive=True)
    seed = sim.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        _fail("sim.seed", "expected an integer")
    initial = sim.get("initial", {})
    if not isinstance(initial, dict):
        _fail("sim.initial", "expected an object of 'kx,ky' -> coefficient")
    init_items = []
    for key, val in initial.items():
        try:
            kx, ky = (int(part) for part in key.split(","))
        except ValueError:
            _fail(f"sim.initial.{key}", "key must look like 'kx,ky'")
        init_items.append(((kx, ky), _check_number(val, f"sim.initial.{key}")))
    analysis = raw.get("analysis", {})
    required, optional = _ANALYSIS_SCHEMAS[kind]
    _check_keys(analysis, "analysis", required, optional)
    out = raw.get("out", ".")
    if not isinstance(out, str):
        _fail("config.out", "expected a path string")
    parsed = dict(raw)
    parsed["_forcing"] = forcing
    parsed["_sim_kwargs"] = dict(nu=nu, radius=radius, dt=dt,
                                 t_final=t_final, seed=seed)
    parsed["_initial_items"] = init_items
    return parsed


def _sim_config(parsed) -> SimConfig:
    kwargs = parsed["_sim_kwargs"]
    geometry = ForcingGeometry(frozenset(parsed["_forcing"]))
    cfg = SimConfig(nu=kwargs["nu"], forcing=geometry,
                    radius=kwargs["radius"], dt=kwargs["dt"],
                    t_final=kwargs["t_final"], seed=kwargs["seed"])
    if parsed["_initial_items"]:
        basis = cfg.basis()
        init = SpectralField(basis)
        for mode, coeff in parsed["_initial_items"]:
            if mode not in basis.index:
                _fail(f"sim.initial.{mode[0]},{mode[1]}",
                      "mode outside the basis radius")
            init.coeffs[basis.index[mode]] = coeff
        cfg = SimConfig(nu=kwargs["nu"], forcing=geometry,
                        radius=kwargs["radius"], dt=kwargs["dt"],
                        t_final=kwargs["t_final"], initial=init,
                        seed=kwargs["seed"])
    return cfg


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in row])


def _run_lattice(parsed, out_dir: Path):
    geometry = ForcingGeometry(frozenset(parsed["_forcing"]))
    radius = parsed["_sim_kwargs"]["radius"]
    result = reachable_modes(geometry, radius)
    generating, reason = is_generating(geometry)
    rows = []
    for n, shell in enumerate(result.shells):
        for mode in sorted(shell):
            rows.append([mode[0], mode[1], n])
    _write_csv(out_dir / "reachability.csv", ["kx", "ky", "shell"], rows)
    summary = {
        "is_generating": generating,
        "reason": reason,
        "covers_ball": result.covers_ball(radius),
        "saturated": result.saturated,
        "n_reached": len(result.reached),
    }
    return {"reachability.csv": summary}


def _run_simulate(parsed, out_dir: Path):
    cfg = _sim_config(parsed)
    n_paths = parsed.get("analysis", {}).get("n_paths", 1)
    info = {}
    for p in range(n_paths):
        traj = simulate(cfg, path_index=p)
        traj.to_jsonl(out_dir / f"trajectory_{p}.jsonl")
        traj.norms_to_csv(out_dir / f"norms_{p}.csv")
        res = enstrophy_residual(traj)
        info[f"trajectory_{p}.jsonl"] = {
            "final_enstrophy": float(traj.enstrophy_series()[-1]),
            "final_residual": float(res[-1]),
        }
    return info


def _run_malliavin(parsed, out_dir: Path):
    cfg = _sim_config(parsed)
    analysis = parsed["analysis"]
    subspace = _check_mode_list(analysis["subspace"], "analysis.subspace")
    t = _check_number(analysis["t"], "analysis.t", positive=True)
    n_paths = analysis.get("n_paths", 100)
    epsilons = analysis.get("epsilons",
                            [10.0 ** -p for p in range(1, 9)])
    table = min_eigenvalue_tail(cfg, t, subspace, n_paths, epsilons)
    _write_csv(out_dir / "spectrum.csv",
               ["path", "lambda_min", "lambda_min_h1", "lambda_max", "trace"],
               [[p, float(table.lambda_min[p]), float(table.lambda_min_h1[p]),
                 float(table.lambda_max[p]), float(table.trace[p])]
                for p in range(n_paths)])
    _write_csv(out_dir / "tail.csv",
               ["epsilon", "frequency", "wilson_low", "wilson_high"],
               [[float(e), float(f), float(lo), float(hi)]
                for e, f, (lo, hi) in zip(table.epsilons, table.frequencies,
                                          table.intervals)])
    return {"tail.csv": {"slope": float(table.slope)
                         if np.isfinite(table.slope) else None}}


def _run_quadvar(parsed, out_dir: Path):
    analysis = parsed["analysis"]
    delta_cap = _check_number(analysis["delta_cap"], "analysis.delta_cap",
                              positive=True)
    horizon = _check_number(analysis.get("horizon", 1.0), "analysis.horizon",
                            positive=True)
    n_proc = analysis.get("n_processes", 2)
    n_paths = analysis.get("n_paths", 100)
    seed = parsed["_sim_kwargs"]["seed"]
    scheme = partition_scheme(delta_cap, horizon)
    times = scheme.all_nodes()
    paths = sample_wiener_ensemble(times, n_proc, n_paths, seed=seed)
    freq = event_frequencies(paths, scheme)
    rows = [
        ["small_quadratic_variation", freq.freq_a, freq.ci_a[0],
         freq.ci_a[1], freq.bound_a],
        ["large_cross_variation", freq.freq_b, freq.ci_b[0], freq.ci_b[1],
         freq.bound_b],
        ["large_holder_norm", freq.freq_c, freq.ci_c[0], freq.ci_c[1],
         float("nan")],
    ]
    _write_csv(out_dir / "events.csv",
               ["event", "frequency", "wilson_low", "wilson_high",
                "analytic_bound"], rows)
    return {"events.csv": {"n_paths": n_paths, "m": scheme.m,
                           "delta": scheme.delta}}


def _run_control(parsed, out_dir: Path):
    from .flows import control_search
    cfg = _sim_config(parsed)
    analysis = parsed["analysis"]
    projection = _check_mode_list(analysis["projection"],
                                  "analysis.projection")
    target = analysis["target"]
    if (not isinstance(target, list)
            or len(target) != len(projection)):
        _fail("analysis.target", "must match the projection length")
    target = [_check_number(v, f"analysis.target[{i}]")
              for i, v in enumerate(target)]
    s = _check_number(analysis.get("s", 0.0), "analysis.s") \
        if analysis.get("s", 0.0) != 0.0 else 0.0
    t = _check_number(analysis["t"], "analysis.t", positive=True)
    result = control_search(cfg, projection, np.array(target), s, t,
                            max_iters=analysis.get("max_iters", 200),
                            tol=analysis.get("tol", 1e-8))
    forced = sorted(cfg.forcing.z_star)
    header = ["step"] + [f"h_{k[0]}_{k[1]}" for k in forced]
    _write_csv(out_dir / "control.csv", header,
               [[i] + [float(v) for v in row]
                for i, row in enumerate(result.control)])
    return {"control.csv": {
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "achieved": [float(v) for v in result.achieved],
    }}


def _run_bracket(parsed, out_dir: Path):
    cfg = _sim_config(parsed)
    analysis = parsed["analysis"]
    phi_mode = tuple(_check_mode_list([analysis["phi_mode"]],
                                      "analysis.phi_mode")[0])
    t0 = _check_number(analysis["t0"], "analysis.t0")
    t1 = _check_number(analysis["t1"], "analysis.t1", positive=True)
    traj = simulate(cfg)
    basis = traj.basis
    if phi_mode not in basis.index:
        _fail("analysis.phi_mode", "mode outside the basis radius")
    phi = SpectralField.single_mode(basis, phi_mode)
    bd = bracket_decomposition(traj, t0, t1, phi)
    rows = []
    for i, s in enumerate(bd.times):
        recon = bd.X[i] + sum(bd.Y[a, i] * bd.W[i, a]
                              for a in range(len(bd.forced_modes)))
        rows.append([float(s), float(np.max(np.abs(bd.U[i]))),
                     float(np.max(np.abs(bd.X[i]))),
                     float(np.max(np.abs(recon)))])
    _write_csv(out_dir / "bracket.csv",
               ["s", "sup_U", "sup_X", "sup_reconstructed_dU"], rows)
    plus = [k for k in basis.modes if is_plus(k)]
    worst = 0.0
    for a, j in enumerate(bd.forced_modes):
        if not is_plus(j):
            continue
        for l in plus:
            li = basis.index[l]
            lhs_series = PAIRING_PREFACTOR * bd.Y[a, :, li]
            rhs_series = np.array([pairing_rhs(basis, bd.U[i], j, l)
                                   for i in range(len(bd.times))])
            worst = max(worst, float(np.max(np.abs(lhs_series - rhs_series))))
    return {"bracket.csv": {"max_pairing_violation": worst,
                            "pairing_prefactor": float(PAIRING_PREFACTOR)}}


_RUNNERS = {
    "lattice": _run_lattice,
    "simulate": _run_simulate,
    "malliavin": _run_malliavin,
    "quadvar": _run_quadvar,
    "control": _run_control,
    "bracket": _run_bracket,
}


def run_experiment(raw_config: dict, out_dir=None, seed=None) -> dict:
    """Validate, dispatch, and persist one experiment; returns the manifest."""
    parsed = parse_config(raw_config)
    if seed is not None:
        parsed["_sim_kwargs"]["seed"] = seed
        parsed.setdefault("sim", {})
        parsed["sim"] = dict(parsed["sim"], seed=seed)
    out = Path(out_dir) if out_dir is not None else Path(parsed.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    manifest = {
        "config": {k: v for k, v in parsed.items() if not k.startswith("_")},
        "version": __version__,
        "status": "partial",
        "artifacts": {},
    }
    try:
        manifest["artifacts"] = _RUNNERS[parsed["kind"]](parsed, out)
        manifest["status"] = "complete"
    except ConfigError:
        raise                      # schema problem: no artifacts at all
    except Exception:
        manifest["wall_time_s"] = time.monotonic() - start
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        raise
    manifest["wall_time_s"] = time.monotonic() - start
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vortexlab",
        description="spectral vorticity laboratory experiment runner")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if not isinstance(raw, dict):
        print("error: config root must be an object", file=sys.stderr)
        return 2
    raw["kind"] = args.kind if "kind" not in raw else raw["kind"]
    if raw["kind"] != args.kind:
        print(f"error: config kind {raw['kind']!r} does not match "
              f"subcommand {args.kind!r}", file=sys.stderr)
        return 2
    try:
        manifest = run_experiment(raw, out_dir=args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:                      # noqa: BLE001
        print(f"error: experiment failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {', '.join(manifest['artifacts'])} "
          f"(status {manifest['status']})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
