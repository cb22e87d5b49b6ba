"""Command-line driver for the front-stability pipeline.

Every command reads a JSON config (validated against a per-command
schema before any computation), writes its outputs plus a provenance
copy of the config into the output directory, and is deterministic:
re-running the same config reproduces the output files byte for byte.

Exit codes: 0 success, 1 numeric failure, 2 config error; in
``evans-contour --gate`` mode the process exits with 10 + n where n is
the number of unstable eigenvalues enclosed by the contour.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import evans, front1d, front2d, projection
from .model import cubic_autocatalysis
from .numkit import ToleranceSpec


class ConfigError(Exception):
    pass


# schema entries: name -> (type, required, default)
_COMMON = {
    "delta": (float, False, None),
    "tol_abs": (float, False, 1e-8),
    "tol_rel": (float, False, 1e-6),
}

SCHEMAS = {
    "front1d": {
        "delta": (float, True, None),
        "domain": (list, False, [-150.0, 150.0]),
        "n_x": (int, False, 3001),
    },
    "front2d": {
        "delta": (float, True, None),
        "domain": (list, False, [-150.0, 150.0]),
        "n_x": (int, False, 301),
        "period": (float, False, 120.0),
        "n_y": (int, False, 240),
        "center": (float, False, 50.0),
        "wrinkle_amplitude": (float, False, 2.0),
        "wrinkle_mode": ((int, str), False, "auto"),
        "freeze_time": (float, False, 100.0),
        "freeze_dt": (float, False, 0.25),
        "continue_from": (float, False, None),
        "continue_steps": (int, False, 5),
        "planar_n_x": (int, False, 3001),
    },
    "project": {
        "front": (str, True, None),
        "K": (int, True, None),
        "period": (float, False, None),
    },
    "evans-scan": {
        "system": (str, True, None),
        "interval": (list, True, None),
        "n_samples": (int, False, 161),
        "x_star": (float, False, 0.0),
        "bounds": (list, False, None),
        "backend": (str, False, "riccati"),
        "tol_abs": (float, False, 1e-8),
        "tol_rel": (float, False, 1e-6),
    },
    "evans-contour": {
        "system": (str, True, None),
        "front": (str, False, None),
        "contour": (str, False, "sectorial"),
        "radius": (float, False, 1e-4),
        "re_cap": (float, False, None),
        "sector_cap": (float, False, None),
        "x_star": (float, False, 0.0),
        "bounds": (list, False, None),
        "backend": (str, False, "riccati"),
        "tol_abs": (float, False, 1e-8),
        "tol_rel": (float, False, 1e-6),
    },
    "evans-angle": {
        "system": (str, True, None),
        "lambdas": (list, True, None),
        "x_star": (float, False, 0.0),
        "bounds": (list, False, None),
        "tol_abs": (float, False, 1e-8),
        "tol_rel": (float, False, 1e-6),
    },
    "dispersion": {
        "front": (str, True, None),
        "wavenumbers": (list, True, None),
        "x_star": (float, False, 0.0),
        "bounds": (list, False, [-25.0, 25.0]),
        "tol_abs": (float, False, 1e-8),
        "tol_rel": (float, False, 1e-6),
    },
    "eigs-direct": {
        "front": (str, True, None),
        "sigma": (float, False, 1.0),
        "n_eigs": (int, False, 24),
    },
    "factorization-check": {
        "system": (str, True, None),
        "lambdas": (list, True, None),
        "x_star": (float, False, 0.0),
        "bounds": (list, False, None),
        "tol_abs": (float, False, 1e-10),
        "tol_rel": (float, False, 1e-10),
    },
}


def load_config(path, command):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    schema = SCHEMAS[command]
    cfg = {}
    for key, (typ, required, default) in schema.items():
        if key in raw:
            val = raw[key]
            if typ is float and isinstance(val, int):
                val = float(val)
            types = typ if isinstance(typ, tuple) else (typ,)
            if not isinstance(val, types):
                raise ConfigError(f"config field {key!r} must be {typ}")
            cfg[key] = val
        elif required:
            raise ConfigError(f"config field {key!r} is required for {command}")
        else:
            cfg[key] = default
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _prepare_out(out, cfg, command):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    record = dict(cfg)
    record["_command"] = command
    (out / "config.json").write_text(json.dumps(record, indent=2, sort_keys=True))
    return out, config_hash(cfg)


def _tol(cfg, args):
    abs_tol = args.tol_abs if args.tol_abs is not None else cfg.get("tol_abs", 1e-8)
    rel_tol = args.tol_rel if args.tol_rel is not None else cfg.get("tol_rel", 1e-6)
    return ToleranceSpec(abs_tol, rel_tol)


def _load_front_any(path):
    path = Path(path)
    if path.suffix == ".csv":
        return front1d.load_front_csv(path)
    return front2d.load_front2d(path)


def _zeros_csv(out, name, scan, K, x_star, h):
    with open(out / name, "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("re_lambda,im_lambda,log_abs_D,arg_D,backend,K,x_star\n")
        for lam, la, sg in zip(scan.lams, scan.log_abs, scan.signs):
            arg = 0.0 if sg > 0 else np.pi
            fh.write("%.9g,%.9g,%.9g,%.9g,%s,%d,%.9g\n"
                     % (lam, 0.0, la, arg, scan.backend, K, x_star))


def cmd_front1d(cfg, out, args):
    model = cubic_autocatalysis(cfg["delta"])
    prof = front1d.solve_planar_front(model, tuple(cfg["domain"]), cfg["n_x"])
    out, h = _prepare_out(out, cfg, "front1d")
    front1d.save_front_csv(prof, out / "front.csv")
    print(f"c = {prof.speed:.9g}")
    return 0


def _auto_mode(model, planar, period):
    """Fastest-growing discrete transverse mode of the planar front."""
    kappas = 2 * np.pi * np.arange(1, 5) / period
    curve = evans.dispersion_relation(planar, kappas)
    best = int(np.argmax(curve.growth_rates))
    if curve.growth_rates[best] <= 0:
        return 1
    return best + 1


def cmd_front2d(cfg, out, args):
    delta = cfg["delta"]
    start_delta = cfg["continue_from"] if cfg["continue_from"] is not None else delta
    model = cubic_autocatalysis(start_delta)
    planar = front1d.solve_planar_front(
        model, tuple(cfg["domain"]), cfg["planar_n_x"]
    )
    x = np.linspace(cfg["domain"][0], cfg["domain"][1], cfg["n_x"])
    ny = cfg["n_y"]
    y = -cfg["period"] / 2 + (cfg["period"] / ny) * np.arange(ny)
    mode = cfg["wrinkle_mode"]
    if mode == "auto":
        mode = _auto_mode(model, planar, cfg["period"])
    seed = front2d.plant_front(model, planar, x, y, center=cfg["center"],
                               wrinkle_amplitude=cfg["wrinkle_amplitude"],
                               wrinkle_mode=int(mode))
    hist = front2d.freeze_evolve(model, seed, cfg["freeze_time"], cfg["freeze_dt"])
    evolved = front2d.FrontProfile2D(x, y, hist.final.fields, hist.final.zeta,
                                     start_delta, model, "frozen")
    refined = front2d.newton_refine(model, evolved)
    if cfg["continue_from"] is not None and start_delta != delta:
        refined = front2d.continue_in_delta(cubic_autocatalysis, refined, delta,
                                            cfg["continue_steps"])
    out, h = _prepare_out(out, cfg, "front2d")
    front2d.save_front2d(refined, out / "front")
    print(f"c = {refined.speed:.9g} (wrinkle mode {mode})")
    return 0


def cmd_project(cfg, out, args):
    front = _load_front_any(cfg["front"])
    sys_ = projection.build_projected_system(front, cfg["K"], L=cfg["period"])
    out, h = _prepare_out(out, cfg, "project")
    projection.save_projected_system(sys_, out / "system")
    print(f"projected system: n = {sys_.n}, K = {sys_.K}, L = {sys_.L:.9g}")
    return 0


def cmd_evans_scan(cfg, out, args):
    sys_ = projection.load_projected_system(cfg["system"])
    tol = _tol(cfg, args)
    bounds = tuple(cfg["bounds"]) if cfg["bounds"] else None
    backends = (["riccati", "drury_oja"] if cfg["backend"] == "both"
                else [cfg["backend"].replace("-", "_")])
    out, h = _prepare_out(out, cfg, "evans-scan")
    reports = {}
    scans = {}
    for backend in backends:
        scan = evans.scan_and_refine(
            sys_, tuple(cfg["interval"]), backend=backend,
            n_samples=cfg["n_samples"], x_star=cfg["x_star"], bounds=bounds,
            tol=tol, workers=args.workers,
        )
        scans[backend] = scan
        reports[backend] = [
            {"lambda": z.lam, "multiplicity": z.multiplicity,
             "log_abs_D": z.log_abs, "flagged": z.flagged}
            for z in scan.zeros
        ]
        _zeros_csv(out, f"samples_{backend}.csv", scan, sys_.K, cfg["x_star"], h)
    payload = {"config_sha256": h, "K": sys_.K, "zeros": reports}
    if len(backends) == 2:
        za = [z.lam for z in scans["riccati"].zeros]
        zb = [z.lam for z in scans["drury_oja"].zeros]
        pairs = []
        for a in za:
            if zb:
                b = min(zb, key=lambda v: abs(v - a))
                pairs.append({"riccati": a, "drury_oja": b, "diff": abs(a - b)})
        payload["backend_agreement"] = pairs
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    for backend in backends:
        for z in scans[backend].zeros:
            print(f"{backend}: zero {z.lam:.9g} (multiplicity {z.multiplicity})")
    return 0


def cmd_evans_contour(cfg, out, args):
    sys_ = projection.load_projected_system(cfg["system"])
    tol = _tol(cfg, args)
    bounds = tuple(cfg["bounds"]) if cfg["bounds"] else None
    backend = cfg["backend"].replace("-", "_")
    if cfg["contour"] == "sectorial":
        re_cap, sector_cap = cfg["re_cap"], cfg["sector_cap"]
        if re_cap is None or sector_cap is None:
            if cfg["front"] is None:
                raise ConfigError("sectorial contour needs re_cap/sector_cap or a front")
            sb = evans.sectorial_bounds(_load_front_any(cfg["front"]))
            re_cap = sb.re_cap if re_cap is None else re_cap
            sector_cap = sb.sector_cap if sector_cap is None else sector_cap
        contour = evans.sectorial_contour(re_cap, sector_cap, cfg["radius"])
    elif cfg["contour"] == "origin-circle":
        contour = evans.origin_circle(cfg["radius"])
    else:
        raise ConfigError(f"unknown contour kind {cfg['contour']!r}")
    res = evans.winding_number(sys_, contour, backend=backend,
                               x_star=cfg["x_star"], bounds=bounds, tol=tol)
    out, h = _prepare_out(out, cfg, "evans-contour")
    payload = {
        "config_sha256": h,
        "contour": cfg["contour"],
        "count": res.count,
        "total_arg_change_turns": res.total_arg_change / (2 * np.pi),
        "n_evaluations": len(res.samples),
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    print(f"winding count = {res.count}")
    if args.gate:
        return 10 + res.count if res.count > 0 else 0
    return 0


def cmd_evans_angle(cfg, out, args):
    sys_ = projection.load_projected_system(cfg["system"])
    tol = _tol(cfg, args)
    bounds = tuple(cfg["bounds"]) if cfg["bounds"] else None
    out, h = _prepare_out(out, cfg, "evans-angle")
    with open(out / "angles.csv", "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("re_lambda,im_lambda,angle\n")
        for lam in cfg["lambdas"]:
            lam = complex(lam) if isinstance(lam, str) else complex(float(lam))
            ang = evans.evans_angle(sys_, lam, cfg["x_star"], bounds, tol)
            fh.write("%.9g,%.9g,%.9g\n" % (lam.real, lam.imag, ang))
            print(f"angle({lam:.6g}) = {ang:.6g}")
    return 0


def cmd_dispersion(cfg, out, args):
    front = _load_front_any(cfg["front"])
    tol = _tol(cfg, args)
    curve = evans.dispersion_relation(front, np.asarray(cfg["wavenumbers"], float),
                                      x_star=cfg["x_star"],
                                      bounds=tuple(cfg["bounds"]), tol=tol)
    out, h = _prepare_out(out, cfg, "dispersion")
    with open(out / "curve.csv", "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("wavenumber,growth_rate\n")
        for k, g in zip(curve.wavenumbers, curve.growth_rates):
            fh.write("%.9g,%.9g\n" % (k, g))
    gmax = curve.growth_rates.max()
    print(f"max growth rate = {gmax:.9g}")
    return 0


def cmd_eigs_direct(cfg, out, args):
    front = _load_front_any(cfg["front"])
    vals = evans.direct_projection_eigs(front, cfg["sigma"], cfg["n_eigs"])
    out, h = _prepare_out(out, cfg, "eigs-direct")
    with open(out / "eigenvalues.csv", "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("re_lambda,im_lambda\n")
        for v in vals:
            fh.write("%.9g,%.9g\n" % (v.real, v.imag))
    for v in vals[:10]:
        print(f"lambda = {v.real:.9g} + {v.imag:.9g}j")
    return 0


def cmd_factorization_check(cfg, out, args):
    sys_ = projection.load_projected_system(cfg["system"])
    tol = _tol(cfg, args)
    bounds = tuple(cfg["bounds"]) if cfg["bounds"] else None
    defects = {}
    for lam in cfg["lambdas"]:
        d = evans.factorization_check(sys_, float(lam), cfg["x_star"], bounds, tol)
        defects[f"{lam}"] = d
        print(f"lambda = {lam}: defect = {d:.3e}")
    out, h = _prepare_out(out, cfg, "factorization-check")
    (out / "report.json").write_text(json.dumps(
        {"config_sha256": h, "defects": defects}, indent=2, sort_keys=True))
    return 0


COMMANDS = {
    "front1d": cmd_front1d,
    "front2d": cmd_front2d,
    "project": cmd_project,
    "evans-scan": cmd_evans_scan,
    "evans-contour": cmd_evans_contour,
    "evans-angle": cmd_evans_angle,
    "dispersion": cmd_dispersion,
    "eigs-direct": cmd_eigs_direct,
    "factorization-check": cmd_factorization_check,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="frontspec",
        description="Travelling-front computation and Evans-function stability",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--backend", choices=["riccati", "drury-oja", "both"],
                       default=None, help="override the config backend")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel workers for lambda sweeps")
        p.add_argument("--tol-abs", type=float, default=None)
        p.add_argument("--tol-rel", type=float, default=None)
        if name == "evans-contour":
            p.add_argument("--gate", action="store_true",
                           help="exit with 10 + unstable count when nonzero")
        else:
            p.set_defaults(gate=False)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.command)
        if args.backend is not None and "backend" in cfg:
            cfg["backend"] = args.backend
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg, args.out, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # numeric / solver failure
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
