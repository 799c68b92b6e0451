"""Command line driver: ``helm-bem mesh|solve|tune|spectrum|sweep|oracle``.

Every command reads a JSON scene (see ``scenes/``) and writes plain CSV/JSON
into ``--out``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from helmbem import assembly, meshgen, oracle, spectral
from helmbem.scene import SceneFile, build_domain_graph, load_scene
from helmbem.solver import SolveReport, gmres

log = logging.getLogger("helmbem")

MODES = ("conventional", "calderon", "param", "jacobi", "ppm")


@dataclass
class RunConfig:
    scene: SceneFile
    mode: str = "ppm"
    level: int = 2
    tol: float = 1e-5
    max_iter: int = 2000
    force_config: dict | None = None
    precision: str = "double"
    out: Path | None = None
    dump_matrix: Path | None = None


@dataclass
class RunResult:
    report: SolveReport
    config: spectral.BieConfig | None
    clusters: spectral.ClusterReport | None
    meshes: list
    matrix: assembly.SystemMatrix | None = None
    l2_error: float | None = None
    timings: dict = field(default_factory=dict)


def select_config(graph, mode: str, force: dict | None = None):
    """The BIE configuration a mode runs with (None for conventional)."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    if mode == "conventional":
        return None
    if force is not None:
        return spectral.config_from_dict(graph, force)
    if mode in ("calderon", "jacobi"):
        return spectral.default_config(graph)
    cfg, _rep = spectral.tune(graph)
    return cfg


def build_system(graph, meshes, mode, cfg, direction, precision="double"):
    """Assemble (A, rhs, preconditioner diagonal or None, cluster report)."""
    dtype = np.complex64 if precision == "single" else np.complex128
    if mode == "conventional":
        A = assembly.assemble_system(graph, meshes, assembly.conventional_alphas(graph), "conventional", dtype=dtype)
        b = assembly.assemble_rhs(graph, meshes, direction, "conventional")
        return A, b, None, None
    A = assembly.assemble_system(cfg.graph, meshes, cfg.alphas, "calderon", dtype=dtype)
    b = assembly.assemble_rhs(cfg.graph, meshes, direction, "calderon")
    rep = spectral.accumulation_points(cfg)
    diag = spectral.jacobi_diagonal(rep).vector(A.index) if mode in ("jacobi", "ppm") else None
    return A, b, diag, rep


def series_for_scene(scene: SceneFile):
    """Series solution if the scene is two concentric spheres, else None."""
    geom = scene.geometry or {}
    g = scene.graph
    if geom.get("type") != "spheres" or g.num_regions != 3 or len(geom.get("spheres", [])) != 2:
        return None
    sph = sorted(geom["spheres"], key=lambda s: float(s["radius"]))
    if any(np.linalg.norm(np.asarray(s.get("center", (0, 0, 0)), float)) > 0 for s in sph):
        return None
    if [int(s["inside"]) for s in sph] != [3, 2]:
        return None
    return oracle.series_coefficients(g.omega, g.epsilons, float(sph[0]["radius"]), float(sph[1]["radius"]),
                                      direction=scene.direction)


def run_solve(rc: RunConfig, meshes=None, keep_matrix: bool = False) -> RunResult:
    scene = rc.scene
    graph = scene.graph
    t0 = time.perf_counter()
    base_meshes = meshes if meshes is not None else meshgen.scene_meshes(scene, rc.level)
    cfg = select_config(graph, rc.mode, rc.force_config)
    use_meshes = base_meshes if cfg is None else meshgen.orient_meshes(graph, cfg.graph, base_meshes)
    t1 = time.perf_counter()
    A, b, diag, rep = build_system(graph, use_meshes, rc.mode, cfg, scene.direction, rc.precision)
    t2 = time.perf_counter()
    if rc.dump_matrix is not None:
        np.save(rc.dump_matrix, A.data)
    report = gmres(lambda v: assembly.matvec(A, v), b, diag, tol=rc.tol, max_iter=rc.max_iter)
    t3 = time.perf_counter()
    err = None
    series = series_for_scene(scene)
    if series is not None:
        u = np.concatenate([u for u, _w in assembly.split_solution(A.index, report.solution)])
        pts = np.concatenate([m.centroids for m in use_meshes])
        err = oracle.l2_error(u, oracle.eval_analytic(series, pts))
    timings = {"mesh_and_tune": t1 - t0, "assembly": t2 - t1, "solve": t3 - t2}
    return RunResult(report, cfg, rep, use_meshes, A if keep_matrix else None, err, timings)


def result_dict(rc: RunConfig, res: RunResult) -> dict:
    rep = res.report
    out = {
        "mode": rc.mode,
        "level": rc.level,
        "omega": rc.scene.graph.omega,
        "epsilons": list(rc.scene.graph.epsilons),
        "elements": int(sum(len(m) for m in res.meshes)),
        "unknowns": int(2 * sum(len(m) for m in res.meshes)),
        "iterations": rep.iterations,
        "converged": rep.converged,
        "relative_residual": rep.residual_history[-1] if rep.residual_history else 0.0,
        "true_residual": rep.true_residual,
        "l2_error": res.l2_error,
        "config": None if res.config is None else res.config.to_dict(),
        "config_label": "conventional" if res.config is None else res.config.describe(),
        "timings": res.timings,
    }
    if res.clusters is not None:
        out["cluster_points"] = [[p.real, p.imag] for p in res.clusters.distinct_points]
        out["max_ratio"] = res.clusters.max_ratio
    return out


def write_residuals(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "relative_residual"])
        for i, r in enumerate(history, start=1):
            w.writerow([i, repr(float(r))])


# --- sweeps ---------------------------------------------------------------------

_TIE = re.compile(r"^\s*eps(\d+)\s*=\s*(?:(1\s*/\s*)?eps(\d+)|([-+0-9.eE]+))\s*$")


def parse_values(text: str) -> list[float]:
    """``"a:b:n"`` (n evenly spaced points, inclusive) or a comma list."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        a, b, n = text.split(":")
        n = int(n)
        return [] if n <= 0 else [float(v) for v in np.linspace(float(a), float(b), n)]
    return [float(v) for v in text.split(",") if v.strip()]


def apply_sweep_point(graph, param: str, value: float, ties=()):
    """Graph with ``param`` (omega or epsK) set to ``value`` and ties applied."""
    eps = list(graph.epsilons)
    omega = graph.omega
    if param == "omega":
        omega = value
    else:
        m = re.fullmatch(r"eps(\d+)", param)
        if not m:
            raise ValueError(f"cannot sweep {param!r}; use omega or epsK")
        eps[int(m.group(1)) - 1] = value
    for tie in ties:
        m = _TIE.match(tie)
        if not m:
            raise ValueError(f"bad tie {tie!r}; use epsK=epsL, epsK=1/epsL or epsK=<number>")
        tgt = int(m.group(1)) - 1
        if m.group(4) is not None:
            eps[tgt] = float(m.group(4))
        else:
            src = eps[int(m.group(3)) - 1]
            eps[tgt] = 1.0 / src if m.group(2) else src
    return build_domain_graph(eps, graph.interfaces, omega)


def run_sweep(scene: SceneFile, param: str, values, modes, level=2, tol=1e-5, max_iter=2000, ties=(),
              precision="double", jobs: int = 1) -> list[dict]:
    """One row per (value, mode); failures are recorded and the sweep goes on."""
    tasks = [(v, m) for v in values for m in modes]
    meshes = meshgen.scene_meshes(scene, level) if tasks else None

    def one(task):
        value, mode = task
        row = {"param": param, "value": value, "mode": mode, "iterations": "", "converged": "",
               "l2_error": "", "wall_time": "", "error": ""}
        t = time.perf_counter()
        try:
            g = apply_sweep_point(scene.graph, param, value, ties)
            sc = SceneFile(g, scene.direction, scene.geometry, scene.base_dir)
            res = run_solve(RunConfig(sc, mode, level, tol, max_iter, precision=precision), meshes=meshes)
            row.update(iterations=res.report.iterations, converged=res.report.converged,
                       l2_error="" if res.l2_error is None else res.l2_error)
        except Exception as exc:  # keep sweeping
            log.warning("sweep point %s=%s mode %s failed: %s", param, value, mode, exc)
            row["error"] = str(exc)
        row["wall_time"] = time.perf_counter() - t
        return row

    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, tasks))
    return [one(t) for t in tasks]


SWEEP_FIELDS = ["param", "value", "mode", "iterations", "converged", "l2_error", "wall_time", "error"]


def write_sweep(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(r)


# --- commands -------------------------------------------------------------------

def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _force(args):
    if not getattr(args, "force_config", None):
        return None
    text = args.force_config
    p = Path(text)
    if p.exists():
        text = p.read_text()
    return json.loads(text)


def _run_config(args) -> RunConfig:
    return RunConfig(load_scene(args.scene), args.mode, args.subdiv, args.tol, args.max_iter, _force(args),
                     args.precision, Path(args.out), Path(args.dump_matrix) if args.dump_matrix else None)


def cmd_mesh(args) -> int:
    scene = load_scene(args.scene)
    meshes = meshgen.scene_meshes(scene, args.subdiv)
    out = _out_dir(args)
    summary = []
    for itf, m in zip(scene.graph.interfaces, meshes):
        name = f"mesh_{itf.from_region}{itf.to_region}.json"
        meshgen.save_mesh(m, out / name)
        summary.append({"interface": list(itf.pair), "file": name, "triangles": len(m),
                        "area": m.total_area()})
        print(f"Gamma_{itf.from_region}{itf.to_region}: {len(m)} triangles, area {m.total_area():.6f} -> {name}")
    with open(out / "meshes.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return 0


def cmd_solve(args) -> int:
    rc = _run_config(args)
    out = _out_dir(args)
    res = run_solve(rc)
    data = result_dict(rc, res)
    with open(out / "report.json", "w") as fh:
        json.dump(data, fh, indent=2)
    write_residuals(out / "residuals.csv", res.report.residual_history)
    err = "" if res.l2_error is None else f", l2 error {res.l2_error:.4e}"
    print(f"{rc.mode}: {data['config_label']}; {res.report.iterations} iterations "
          f"(converged={res.report.converged}){err}")
    return 0 if res.report.converged else 2


def cmd_tune(args) -> int:
    scene = load_scene(args.scene)
    rows = spectral.rank_configs(scene.graph)
    best = rows[0][0]
    order = sorted(rows, key=lambda r: (r[0].flips, spectral._tie_key(r[0])))
    table = []
    print(f"{len(rows)} admissible configurations")
    for cfg, rep in order:
        mark = "*" if cfg is best else " "
        pts = ", ".join(f"{p.real:.6g}{p.imag:+.6g}j" for p in rep.distinct_points)
        print(f"{mark} {cfg.describe():<60s} ratio {rep.max_ratio:10.6f}  points [{pts}]")
        table.append({"selected": cfg is best, "label": cfg.describe(), "max_ratio": rep.max_ratio,
                      "points": [[p.real, p.imag] for p in rep.distinct_points], "config": cfg.to_dict()})
    if args.out:
        out = _out_dir(args)
        with open(out / "tune.json", "w") as fh:
            json.dump(table, fh, indent=2)
    return 0


def cmd_spectrum(args) -> int:
    rc = _run_config(args)
    out = _out_dir(args)
    graph = rc.scene.graph
    meshes = meshgen.scene_meshes(rc.scene, rc.level)
    cfg = select_config(graph, rc.mode, rc.force_config)
    if cfg is not None:
        meshes = meshgen.orient_meshes(graph, cfg.graph, meshes)
    A, _b, diag, rep = build_system(graph, meshes, rc.mode, cfg, rc.scene.direction, "double")
    data = A.data if diag is None else A.data * diag[None, :]
    sq = spectral.dense_eigenvalues(data) ** 2
    with open(out / "spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for z in sq:
            w.writerow([repr(float(z.real)), repr(float(z.imag))])
    if rep is None:
        predicted = []
    elif diag is not None:
        predicted = [1.0 + 0.0j]
    else:
        predicted = rep.distinct_points
    side = {"mode": rc.mode, "squared": True, "dimension": int(A.shape[0]),
            "predicted": [[p.real, p.imag] for p in predicted],
            "max_ratio": None if rep is None else rep.max_ratio,
            "config": None if cfg is None else cfg.to_dict()}
    with open(out / "spectrum_predicted.json", "w") as fh:
        json.dump(side, fh, indent=2)
    print(f"{len(sq)} squared eigenvalues; predicted clusters "
          + ", ".join(f"{p.real:.5g}{p.imag:+.5g}j" for p in predicted))
    return 0


def cmd_sweep(args) -> int:
    scene = load_scene(args.scene)
    out = _out_dir(args)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()] if args.modes else [args.mode]
    for m in modes:
        if m not in MODES:
            raise SystemExit(f"unknown mode {m!r}")
    rows = run_sweep(scene, args.param, parse_values(args.values), modes, args.subdiv, args.tol, args.max_iter,
                     args.tie or (), args.precision, args.jobs)
    write_sweep(out / "sweep.csv", rows)
    for r in rows:
        print(f"{r['param']}={r['value']:<10.6g} {r['mode']:<13s} iterations {r['iterations']!s:>5s} {r['error']}")
    return 0


def cmd_oracle(args) -> int:
    scene = load_scene(args.scene)
    series = series_for_scene(scene)
    if series is None:
        raise SystemExit("the series solution needs two concentric spheres (core 3 inside shell 2)")
    if args.points:
        pts = np.loadtxt(args.points, delimiter=",", ndmin=2)[:, :3]
    else:
        pts = np.concatenate([m.centroids for m in meshgen.scene_meshes(scene, args.subdiv)])
    u = oracle.eval_analytic(series, pts)
    out = _out_dir(args)
    with open(out / "oracle.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "re", "im"])
        for p, z in zip(pts, u):
            w.writerow([*(repr(float(c)) for c in p), repr(float(z.real)), repr(float(z.imag))])
    print(f"wrote {len(u)} values to {out / 'oracle.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helm-bem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mode=True):
        sp.add_argument("--scene", required=True, help="scene JSON file")
        sp.add_argument("--subdiv", type=int, default=2, help="mesh level (icosphere subdivisions or box divisions)")
        sp.add_argument("--out", default="out", help="output directory")
        if mode:
            sp.add_argument("--mode", choices=MODES, default="ppm")
            sp.add_argument("--tol", type=float, default=1e-5)
            sp.add_argument("--max-iter", type=int, default=2000)
            sp.add_argument("--force-config", help="JSON (inline or file) fixing orientation and patterns")
            sp.add_argument("--precision", choices=("double", "single"), default="double",
                            help="matrix storage precision (single halves memory)")
            sp.add_argument("--dump-matrix", help="save the system matrix as .npy")

    sp = sub.add_parser("mesh", help="generate and save interface meshes")
    common(sp, mode=False)
    sp.set_defaults(func=cmd_mesh)
    sp = sub.add_parser("solve", help="assemble and solve one scene")
    common(sp)
    sp.set_defaults(func=cmd_solve)
    sp = sub.add_parser("tune", help="list admissible configurations and the selected one")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_tune)
    sp = sub.add_parser("spectrum", help="squared eigenvalues of the assembled matrix")
    common(sp)
    sp.set_defaults(func=cmd_spectrum)
    sp = sub.add_parser("sweep", help="iterations over a parameter range")
    common(sp)
    sp.add_argument("--param", default="omega", help="omega or epsK")
    sp.add_argument("--values", default="", help="a:b:n or comma list")
    sp.add_argument("--tie", action="append", help="constraint such as eps2=1/eps3 (repeatable)")
    sp.add_argument("--modes", default="", help="comma list of modes (default: --mode)")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("oracle", help="series solution at points for concentric spheres")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--points", help="CSV of x,y,z (default: mesh collocation points)")
    sp.add_argument("--subdiv", type=int, default=2)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return int(args.func(args) or 0)


if __name__ == "__main__":
    sys.exit(main())
