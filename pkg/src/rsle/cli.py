"""Command-line front end: ``rsle simulate | hydro | verify | converge``.

Parameters resolve as command-line flag, then config file, then built-in
default; the output directory additionally honours ``RSLE_OUT`` between
the flag and the config file. The config file is flat ``key = value``
text (``#`` comments allowed) using the long flag names with dashes or
underscores. Every run writes ``manifest.json`` with the resolved config
and the SHA-256 of each emitted file.

Exit codes: 0 ok, 1 verification failure, 2 invalid config, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import coupling, dyson, hydro, loewner
from .errors import RsleError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_OUT = "rsle_out"
DEFAULT_POINTS = "0.3j,-0.3,0.5+0.2j"
DEFAULT_Z_GRID = "0.3@90,0.3@120,0.3@150,0.3@-90,0.3@-120,0.3@-150"


class ConfigError(Exception):
    """Invalid user configuration; the message names the field."""


# --------------------------------------------------------------------------- parsing helpers


def parse_complex_list(text: str) -> np.ndarray:
    """Comma-separated complex numbers; ``r@deg`` gives polar form."""
    out = []
    for tok in str(text).split(","):
        tok = tok.strip().replace(" ", "")
        if not tok:
            continue
        if "@" in tok:
            r, deg = tok.split("@")
            out.append(float(r) * np.exp(1j * math.radians(float(deg))))
        else:
            out.append(complex(tok.replace("i", "j")))
    return np.array(out, dtype=complex)


def parse_float_list(text: str) -> List[float]:
    return [float(s) for s in str(text).split(",") if s.strip()]


def parse_int_list(text: str) -> List[int]:
    return [int(s) for s in str(text).split(",") if s.strip()]


def read_config(path: Optional[str]) -> Dict[str, str]:
    """Flat ``key = value`` file; keys normalized to underscores."""
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config: file {path!r} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string("[rsle]\n" + p.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise ConfigError(f"config: cannot parse {path!r}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in cp["rsle"].items()}


class Resolver:
    """Resolve parameters with precedence flag > config > default."""

    def __init__(self, args: argparse.Namespace, config: Dict[str, str]):
        self.args = args
        self.config = config
        self.resolved: Dict[str, Any] = {}

    def get(self, name: str, conv: Callable[[Any], Any], default: Any = None, required: bool = False):
        val = getattr(self.args, name, None)
        if val is None and name in self.config:
            val = self.config[name]
        if val is None:
            if required:
                raise ConfigError(f"{name}: required but not given")
            val = default
        if val is not None:
            try:
                val = conv(val)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{name}: cannot parse {val!r}") from exc
        self.resolved[name] = val
        return val

    def out_dir(self) -> Path:
        val = self.args.out or os.environ.get("RSLE_OUT") or self.config.get("out") or DEFAULT_OUT
        self.resolved["out"] = str(val)
        return Path(val)


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


def require(name: str, ok: bool, what: str) -> None:
    if not ok:
        raise ConfigError(f"{name}: {what}")


def _jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, resolved: Dict[str, Any], files: Sequence[Path]) -> Path:
    entries = [{"path": f.name, "sha256": sha256(f)} for f in sorted(files, key=lambda p: p.name)]
    man = out / "manifest.json"
    write_json(man, {"command": command, "version": __version__, "config": _jsonable(resolved), "files": entries})
    return man


def set_threads(n: Optional[int]) -> None:
    """Cap worker threads; results never depend on the count."""
    if n is None:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# --------------------------------------------------------------------------- simulate


def _init_angles(kind: str, n: int, eps0: float) -> np.ndarray:
    if kind == "single":
        return dyson.single_source(n, 0.0, eps0)
    if kind == "equal":
        return dyson.equally_spaced(n)
    if kind == "cluster":
        return coupling.cluster_init(n)
    raise ConfigError(f"init: unknown kind {kind!r} (single, equal, cluster)")


def cmd_simulate(args, config) -> int:
    r = Resolver(args, config)
    n = r.get("n", int, required=True)
    beta = r.get("beta", float)
    kappa = r.get("kappa", float)
    if beta is None and kappa is None:
        raise ConfigError("beta: give --beta or --kappa")
    if beta is None:
        require("kappa", kappa > 0, "must be positive")
        beta = 8.0 / kappa
        r.resolved["beta"] = beta
    horizon = r.get("horizon", float)
    hydro_time = r.get("hydro_time", float)
    if (horizon is None) == (hydro_time is None):
        raise ConfigError("horizon: give exactly one of --horizon and --hydro-time")
    dt = r.get("dt", float, 1e-4)
    seed = r.get("seed", int, required=True)
    init = r.get("init", str, "single")
    eps0 = r.get("eps0", float, dyson.DEFAULT_EPS0)
    gap_cfl = r.get("gap_cfl", float, dyson.DEFAULT_GAP_CFL)
    allow = r.get("allow_collisions", _bool, False)
    save_every = r.get("save_every", int, 1)
    points = r.get("points", parse_complex_list, DEFAULT_POINTS)
    mask_res = r.get("mask_resolution", int, 0)
    edge_eps = r.get("edge_eps", float, 0.0)
    swallow_eps = r.get("swallow_eps", float, loewner.DEFAULT_SWALLOW_EPS)
    svg = r.get("svg", _bool, False)
    set_threads(r.get("threads", int))

    require("n", n >= 1, "must be >= 1")
    require("beta", beta > 0 and math.isfinite(beta), "must be positive")
    require("beta", beta >= 1.0 or allow, f"{beta} < 1 permits collisions; pass --allow-collisions")
    if hydro_time is not None:
        require("hydro_time", hydro_time > 0, "must be positive")
        horizon = hydro_time / n
        r.resolved["horizon"] = horizon
    require("horizon", horizon > 0, "must be positive")
    require("dt", 0 < dt <= horizon, "must be in (0, horizon]")
    require("eps0", eps0 > 0, "must be positive")
    require("gap_cfl", gap_cfl > 0, "must be positive")
    require("save_every", save_every >= 1, "must be >= 1")
    require("points", np.all(np.abs(points) < 1.0), "all points must lie inside the unit disk")
    require("mask_resolution", mask_res == 0 or mask_res >= 16, "must be 0 (off) or >= 16")
    require("edge_eps", 0.0 <= edge_eps < 1.0, "must be in [0, 1)")
    theta0 = _init_angles(init, n, eps0)

    out = r.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    path = dyson.simulate_dyson(n, beta, theta0, horizon, dt, seed, gap_cfl=gap_cfl, save_every=save_every,
                                allow_collisions=allow, eps0=eps0)
    files = [out / "driving_path.csv"]
    path.to_csv(files[0])
    res = loewner.evolve(points, path, swallow_eps=swallow_eps)
    for k in range(points.size):
        f = out / f"trajectory_{k}.csv"
        res.trajectory_to_csv(f, k)
        files.append(f)
    if mask_res:
        mask = loewner.hull_mask(mask_res, path, horizon, swallow_eps=swallow_eps, edge_eps=edge_eps)
        f = out / "hull_mask.csv"
        mask.to_csv(f)
        files.append(f)
        if svg:
            f = out / "hull.svg"
            hull_pts = mask.z[~mask.inside]
            hydro.write_svg(f, [], mask_points=hull_pts, title=f"N={n} beta={beta:g} t={horizon:g}")
            files.append(f)
    write_manifest(out, "simulate", r.resolved, files)
    print(f"simulate: wrote {len(files)} files to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------- hydro


def cmd_hydro(args, config) -> int:
    r = Resolver(args, config)
    t = r.get("t", float, required=True)
    n_samples = r.get("n_samples", int, 512)
    n_density = r.get("density_points", int, 721)
    fit = r.get("fit_edges", _bool, False)
    svg = r.get("svg", _bool, False)
    set_threads(r.get("threads", int))
    require("t", t > 0 and math.isfinite(t), "hydrodynamic time must be positive")
    require("n_samples", n_samples >= 8, "must be >= 8")
    require("density_points", n_density >= 2, "must be >= 2")

    out = r.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    gam = hydro.boundary_gamma(t, n_samples)
    gtl = hydro.boundary_gamma_tilde(t, n_samples)
    files = [out / "gamma.csv", out / "gamma_tilde.csv", out / "density.csv", out / "hydro.json"]
    hydro.curve_to_csv(gam, files[0])
    hydro.curve_to_csv(gtl, files[1])
    phi = np.linspace(-math.pi, math.pi, n_density)
    hydro.density_to_csv(phi, hydro.density(t, phi), files[2])

    ang = hydro.critical_angles(t)
    info = {
        "t": t,
        "topology": hydro.topology(t).value,
        "critical_angles": {"theta_c": ang.theta_c, "varphi_c": ang.varphi_c, "phi_c": ang.phi_c},
        "gamma": {"endpoint_out": gam.endpoint_out, "endpoint_in": gam.endpoint_in},
        "gamma_tilde": {"endpoint_out": gtl.endpoint_out, "endpoint_in": gtl.endpoint_in},
    }
    if fit:
        fits = {"gamma": hydro.edge_fit(gam), "gamma_tilde": hydro.edge_fit(gtl)} if t <= 1.0 else {}
        info["edge_fits"] = {
            k: {"exponent": f.exponent, "coefficient": f.coefficient, "fit_window": list(f.fit_window),
                "residual": f.residual, "n_points": f.n_points}
            for k, f in fits.items()
        }
        if not fits:
            info["edge_fits_note"] = "no circle-touching endpoint for t > 1"
    write_json(files[3], info)
    if svg:
        f = out / "hydro.svg"
        hydro.write_svg(f, [gam, gtl], title=f"t={t:g} {info['topology']}")
        files.append(f)
    write_manifest(out, "hydro", r.resolved, files)
    print(f"hydro: t={t:g} topology={info['topology']} endpoint_out={gam.endpoint_out:.12g}")
    return EXIT_OK


# --------------------------------------------------------------------------- verify


def _check(name: str, metric: float, tol: float) -> dict:
    return {"name": name, "metric": float(metric), "tol": tol, "pass": bool(metric <= tol)}


def hydro_residual_checks() -> List[dict]:
    """Functional-equation and consistency residuals of the closed-form maps."""
    checks = []
    xs = np.linspace(-0.95, 0.95, 20)
    grid = (xs[None, :] + 1j * xs[:, None]).ravel()
    grid = grid[np.abs(grid) < 0.99]
    for t in (0.2, 0.7, 1.3):
        memb = hydro.domain_membership(t, grid)
        z = grid[np.array([m is hydro.Membership.INSIDE for m in memb])]
        h = hydro.map_h(t, z)
        lam = 4.0 * t * h / (1.0 - h) ** 2
        rhs = 4.0 * t * z / (1.0 - z) ** 2 * math.exp(-t)
        checks.append(_check(f"t_h2 residual t={t}", np.max(np.abs(lam * np.exp(lam) - rhs)), 1e-10))
        g = hydro.g_inf(t, z)
        gd = hydro.g_inf_direct(t, z)
        checks.append(_check(f"factorization t={t}", np.max(np.abs(g - gd) / (1.0 + np.abs(g))), 1e-12))
        lhs = hydro.stieltjes_limit(t, g)
        checks.append(_check(f"characteristics t={t}", np.max(np.abs(lhs - hydro.m0(h))), 1e-9))
    t, z, d = 0.3, 0.2 + 0.1j, 1e-4
    fd = (hydro.g_inf(t + d, z) - hydro.g_inf(t - d, z)) / (2 * d)
    g = hydro.g_inf(t, z)
    checks.append(_check("measure Loewner equation", abs(fd - g * hydro.stieltjes_limit(t, g)) / abs(fd), 1e-5))
    for t in (0.25, 0.5, 0.75):
        gt = hydro.boundary_gamma_tilde(t, 512)
        checks.append(_check(f"|Omega(gamma_tilde)|=1 t={t}",
                             np.max(np.abs(np.abs(hydro.map_omega(t, gt.points[1:])) - 1.0)), 1e-9))
        ang = hydro.critical_angles(t)
        arg = np.angle(hydro.map_omega(t, np.exp(1j * ang.theta_c)))
        checks.append(_check(f"support edge t={t}", abs(arg - ang.phi_c), 1e-8))
    for t in (0.25, 1.0, 2.0):
        checks.append(_check(f"density mass t={t}", abs(hydro.density_mass(t) - 1.0), 1e-6))
    return checks


def _martingale_setup(r: Resolver):
    n = r.get("n", int, 1)
    kappa = r.get("kappa", float, 4.0)
    paths = r.get("paths", int, 10000)
    seed = r.get("seed", int, required=True)
    horizon = r.get("horizon", float, 0.2)
    dt = r.get("dt", float, 5e-4)
    require("n", n >= 1, "must be >= 1")
    require("kappa", 0 < kappa <= 8.0, "must be in (0, 8] so that beta = 8/kappa >= 1")
    require("paths", paths >= 20, "must be >= 20 (batch means use 20 batches)")
    require("horizon", horizon > 0, "must be positive")
    require("dt", 0 < dt <= horizon, "must be in (0, horizon]")
    return n, kappa, paths, seed, horizon, dt


def cmd_verify(args, config) -> int:
    r = Resolver(args, config)
    suite = r.get("suite", str, required=True)
    set_threads(r.get("threads", int))
    out = r.out_dir()
    if suite == "hydro-residuals":
        checks = hydro_residual_checks()
        report = {"suite": suite, "checks": checks, "summary": "PASS" if all(c["pass"] for c in checks) else "FAIL"}
    elif suite == "martingale":
        n, kappa, paths, seed, horizon, dt = _martingale_setup(r)
        z = r.get("z_grid", parse_complex_list, DEFAULT_Z_GRID)
        offs = [r.get(k, float, 0.0) for k in ("xi_offset", "chi_offset", "zeta_offset")]
        require("z_grid", np.all(np.abs(z) < 1.0) and z.size > 0, "points must lie inside the unit disk")
        rep = coupling.martingale_test(n, kappa, z, horizon, paths, dt, seed, xi_offset=offs[0],
                                       chi_offset=offs[1], zeta_offset=offs[2])
        report = dict(rep.to_dict(), suite=suite)
    elif suite == "qv":
        n, kappa, paths, seed, horizon, _ = _martingale_setup(r)
        z = r.get("z", complex, 0.3j)
        w = r.get("w", complex, -0.2)
        dts = r.get("dts", parse_float_list, "4e-4,2e-4,1e-4")
        rep = coupling.quad_variation_test(n, kappa, z, w, horizon, paths, dts, seed)
        d = rep.to_dict()
        decreasing = all(a > b for a, b in zip(d["mean_abs_defect"][::-1], d["mean_abs_defect"][::-1][1:]))
        ok = rep.order >= 0.5 and decreasing
        report = dict(d, suite=suite, summary="PASS" if ok else "FAIL")
    elif suite == "hadamard":
        seed = r.get("seed", int, 0)
        count = r.get("paths", int, 100)
        rng = np.random.default_rng(seed)
        rows = []
        while len(rows) < count:
            z, w = 0.85 * np.sqrt(rng.uniform(size=2)) * np.exp(2j * np.pi * rng.uniform(size=2))
            x = np.exp(2j * np.pi * rng.uniform())
            if abs(z - w) < 0.05:
                continue
            lhs, rhs = coupling.hadamard_check(z, w, x)
            rows.append({"z": z, "w": w, "x": x, "lhs": lhs, "rhs": rhs, "pass": abs(lhs - rhs) <= 1e-6})
        report = {"suite": suite, "triples": rows, "summary": "PASS" if all(x["pass"] for x in rows) else "FAIL"}
    else:
        raise ConfigError(f"suite: unknown suite {suite!r} (hydro-residuals, martingale, qv, hadamard)")
    out.mkdir(parents=True, exist_ok=True)
    f = out / f"verify_{suite}.json"
    write_json(f, report)
    write_manifest(out, "verify", r.resolved, [f])
    print(f"verify {suite}: {report['summary']}")
    return EXIT_OK if report["summary"] == "PASS" else EXIT_FAIL


# --------------------------------------------------------------------------- converge


def stieltjes_error(n: int, t: float, paths: int, seed: int, *, beta: float = 32.0, eps0: float = 0.05,
                    gap_cfl: float = 0.4, dt_hydro: float = 1e-3, n_circle: int = 32):
    """Sup over ``|z| = 2`` of ``|mean_paths M_N - M_t|`` at hydrodynamic time ``t``.

    Each path runs in SDE time ``t/N`` from a single source spread over
    ``+- eps0``. Returns the error and the final states, shape (paths, N).
    """
    zc = 2.0 * np.exp(2j * np.pi * np.arange(n_circle) / n_circle)
    exact = hydro.stieltjes_limit(t, zc)
    finals = np.empty((paths, n))
    for p in range(paths):
        path = dyson.simulate_dyson(n, beta, dyson.single_source(n, 0.0, eps0), t / n, dt_hydro / n, seed,
                                    path_index=p, gap_cfl=gap_cfl, save_every=10**9, eps0=eps0)
        finals[p] = path.states[-1]
    emp = np.mean([dyson.empirical_stieltjes(s, zc) for s in finals], axis=0)
    return float(np.max(np.abs(emp - exact))), finals


def _segment_distance(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a, b = poly[:-1], poly[1:]
    ab = b - a
    ap = pts[:, None] - a[None, :]
    denom = np.where(np.abs(ab) > 0, np.abs(ab) ** 2, 1.0)
    s = np.clip((ap * np.conj(ab)).real / denom, 0.0, 1.0)
    return np.min(np.abs(ap - s * ab), axis=1)


def hull_distance(n: int, t: float, seed: int, *, beta: float = 32.0, eps0: float = 0.05, gap_cfl: float = 0.4,
                  dt_hydro: float = 1e-3, resolution: int = 96, edge_eps: float = 1e-3, save_every: int = 20):
    """Largest distance from a mask-boundary cell to ``gamma_t`` (and its conjugate)."""
    path = dyson.simulate_dyson(n, beta, dyson.single_source(n, 0.0, eps0), t / n, dt_hydro / n, seed,
                                gap_cfl=gap_cfl, save_every=save_every, eps0=eps0)
    mask = loewner.hull_mask(resolution, path, t / n, edge_eps=edge_eps)
    b = mask.boundary_points()
    gam = hydro.boundary_gamma(t, 1024).points
    curve = np.concatenate([gam[::-1], np.conj(gam)])
    if b.size == 0:
        return float("nan"), mask
    return float(np.max(_segment_distance(b, curve))), mask


def cmd_converge(args, config) -> int:
    r = Resolver(args, config)
    ns = r.get("ns", parse_int_list, "50,200,800")
    t = r.get("t", float, 0.5)
    paths = r.get("paths", int, 200)
    seed = r.get("seed", int, required=True)
    beta = r.get("beta", float, 32.0)
    eps0 = r.get("eps0", float, 0.05)
    gap_cfl = r.get("gap_cfl", float, 0.4)
    dt_h = r.get("dt", float, 1e-3)
    hull = r.get("hull", _bool, False)
    res = r.get("mask_resolution", int, 96)
    edge_eps = r.get("edge_eps", float, 1e-3)
    set_threads(r.get("threads", int))
    require("ns", len(ns) >= 1 and all(k >= 1 for k in ns), "need positive particle counts")
    require("t", t > 0, "hydrodynamic time must be positive")
    require("paths", paths >= 1, "must be >= 1")
    require("beta", beta >= 1.0, "must be >= 1")
    require("eps0", eps0 > 0, "must be positive")
    require("dt", dt_h > 0, "must be positive")
    require("mask_resolution", res >= 16, "must be >= 16")

    out = r.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in ns:
        err, _ = stieltjes_error(n, t, paths, seed, beta=beta, eps0=eps0, gap_cfl=gap_cfl, dt_hydro=dt_h)
        row = {"n": n, "stieltjes_sup_error": err}
        if hull:
            row["hull_distance"], _ = hull_distance(n, t, seed, beta=beta, eps0=eps0, gap_cfl=gap_cfl,
                                                    dt_hydro=dt_h, resolution=res, edge_eps=edge_eps)
        rows.append(row)
        print(f"converge: N={n} " + " ".join(f"{k}={v:.6g}" for k, v in row.items() if k != "n"))
    f_csv = out / "converge.csv"
    keys = list(rows[0].keys())
    f_csv.write_text(",".join(keys) + "\n" + "".join(",".join(repr(float(row[k])) if k != "n" else str(row[k])
                                                              for k in keys) + "\n" for row in rows),
                     encoding="utf-8")
    f_json = out / "converge.json"
    write_json(f_json, {"t": t, "rows": rows})
    write_manifest(out, "converge", r.resolved, [f_csv, f_json])
    return EXIT_OK


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rsle", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rsle {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output directory (overrides RSLE_OUT)")
        p.add_argument("--threads", type=int, help="cap on worker threads; results do not depend on it")

    p = sub.add_parser("simulate", help="Dyson driving path plus Loewner trajectories")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--horizon", type=float, help="SDE time")
    p.add_argument("--hydro-time", type=float, help="hydrodynamic time; the SDE runs to this over N")
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--init", choices=["single", "equal", "cluster"])
    p.add_argument("--eps0", type=float)
    p.add_argument("--gap-cfl", type=float)
    p.add_argument("--save-every", type=int)
    p.add_argument("--points", help="comma-separated complex points, e.g. 0.3j,-0.2 or 0.3@90")
    p.add_argument("--mask-resolution", type=int)
    p.add_argument("--edge-eps", type=float)
    p.add_argument("--swallow-eps", type=float)
    p.add_argument("--allow-collisions", action="store_const", const=True)
    p.add_argument("--svg", action="store_const", const=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hydro", help="closed-form hydrodynamic objects at time t")
    common(p)
    p.add_argument("--t", type=float)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--density-points", type=int)
    p.add_argument("--fit-edges", action="store_const", const=True)
    p.add_argument("--svg", action="store_const", const=True)
    p.set_defaults(func=cmd_hydro)

    p = sub.add_parser("verify", help="verification suites with PASS/FAIL report")
    common(p)
    p.add_argument("--suite")
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--dts", help="comma-separated step sizes for the qv suite")
    p.add_argument("--z-grid", help="comma-separated complex points")
    p.add_argument("--z", help="first point of the qv suite")
    p.add_argument("--w", help="second point of the qv suite")
    p.add_argument("--xi-offset", type=float)
    p.add_argument("--chi-offset", type=float)
    p.add_argument("--zeta-offset", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("converge", help="finite-N to hydrodynamic convergence table")
    common(p)
    p.add_argument("--ns", help="comma-separated particle counts")
    p.add_argument("--t", type=float, help="hydrodynamic time")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--gap-cfl", type=float)
    p.add_argument("--dt", type=float, help="step cap in hydrodynamic time")
    p.add_argument("--hull", action="store_const", const=True, help="also compare hull masks with gamma_t")
    p.add_argument("--mask-resolution", type=int)
    p.add_argument("--edge-eps", type=float)
    p.set_defaults(func=cmd_converge)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    try:
        config = read_config(args.config)
        return args.func(args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RsleError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
