"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v`` to see the report lines; the slow
criteria (refinement studies, dense spectra) take about ten minutes
on one core.
"""
import gc
import time
from pathlib import Path

import numpy as np
import pytest

from helmbem import cli
from helmbem.assembly import BM, STANDARD, assemble_system, exterior_alpha
from helmbem.kernels import operator_blocks
from helmbem.meshgen import build_scene_four_boxes, icosphere, scene_meshes
from helmbem.oracle import bessel_pair, eval_analytic, eval_flux, series_coefficients
from helmbem.scene import build_domain_graph, flip_interface, load_scene
from helmbem.solver import gmres
from helmbem.spectral import (
    BieConfig,
    Pattern,
    accumulation_points,
    default_config,
    dense_eigenvalues,
    enumerate_configs,
)

SCENES = Path(__file__).resolve().parents[1] / "scenes"

# squared-eigenvalue cluster radius at 320 elements per sphere, omega=1.
# The dense spectrum puts its 70% quantile of distances at 0.134; 0.15 keeps a
# small margin and is held fixed for the refined mesh.
R_STAR = 0.15


@pytest.fixture
def report(capsys):
    def emit(num, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'}  {name}  {detail}")
        return ok
    return emit


def spheres_graph(eps, omega=1.0):
    return build_domain_graph(eps, [(1, 2, "outer"), (3, 2, "inner")], omega)


# 1 ---------------------------------------------------------------------------

def _relation_errors(cfg):
    lam = accumulation_points(cfg).lambdas
    nb = cfg.graph.num_interfaces
    rel = lambda a, b: abs(a - b) / max(abs(a), abs(b))
    errs = []
    for b, (i, _j) in enumerate(cfg.graph.pairs):
        pat = cfg.pattern_of(i)
        if pat.kind == "P1":
            errs.append(rel(lam[b], lam[b + nb]))
        elif pat.kind == "P2":
            errs.append(rel(lam[b], lam[pat.ref]))
        else:
            errs.append(rel(lam[b + nb], lam[pat.ref]))
    return errs


def test_c01_cluster_formula_exactness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    g4, _ = build_scene_four_boxes()
    shapes = enumerate_configs(spheres_graph((1, 2, 3))) + enumerate_configs(g4.with_omega(1.0))
    worst, kinds = 0.0, set()
    for _ in range(1000):
        shape = shapes[rng.integers(len(shapes))]
        n = shape.graph.num_regions
        eps = [1.0] + list(10.0 ** rng.uniform(-1.5, 1.5, n - 1))
        omega = 10.0 ** rng.uniform(-1, 1.5)
        g = shape.graph.with_epsilons(eps).with_omega(omega)
        cfg = BieConfig(g, shape.patterns, shape.flips)
        kinds.update(p.kind for p in cfg.patterns.values())
        worst = max(worst, max(_relation_errors(cfg)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0 and kinds == {"P1", "P2", "P3"}
    report(1, "cluster pairing and merges", ok, f"max rel {worst:.2e}, {elapsed:.2f} s")
    assert ok


# 2 ---------------------------------------------------------------------------

def test_c02_known_cluster_values(report):
    t0 = time.perf_counter()
    a = sorted(p.real for p in accumulation_points(default_config(spheres_graph((1, 2, 3)))).distinct_points)
    b = sorted(p.real for p in accumulation_points(default_config(spheres_graph((1, 4, 10)))).distinct_points)
    gf = flip_interface(spheres_graph((1, 4, 10)), 1)
    c = sorted(p.real for p in accumulation_points(BieConfig(gf, {2: Pattern("P3", 0)})).distinct_points)
    elapsed = time.perf_counter() - t0
    close = lambda got, want: len(got) == len(want) and all(
        abs(x - y) <= 5e-5 * abs(y) for x, y in zip(got, want))
    ok = close(a, [-0.75, -0.41667]) and close(b, [-1.25, -0.35]) and close(c[:1], [-1.25]) \
        and abs(c[1] - -1.0698) <= 5e-5 * 1.0698 and elapsed < 1.0
    report(2, "reference accumulation points", ok, f"{a} {b} {c}")
    assert ok


# 3 ---------------------------------------------------------------------------

def _clustered_fraction(level):
    scene = load_scene(SCENES / "spheres.json")
    g = scene.graph.with_omega(1.0)
    cfg = default_config(g)
    meshes = scene_meshes(scene, level)
    A = assemble_system(g, meshes, cfg.alphas, "calderon")
    sq = dense_eigenvalues(A.data) ** 2
    del A
    gc.collect()
    pts = np.array(accumulation_points(cfg).distinct_points)
    dist = np.min(np.abs(sq[:, None] - pts[None, :]), axis=1)
    return float(np.mean(dist <= R_STAR)), float(np.quantile(dist, 0.7))


@pytest.mark.slow
def test_c03_spectrum_clustering(report):
    f2, q2 = _clustered_fraction(2)
    f3, q3 = _clustered_fraction(3)
    ok = f2 >= 0.7 and f3 > f2
    report(3, "squared spectrum clusters", ok,
           f"r*={R_STAR}: 320/sphere {f2:.3f} (q70 {q2:.3f}), 1280/sphere {f3:.3f} (q70 {q3:.3f})")
    assert ok


# 4 and 5 ---------------------------------------------------------------------

LEVELS = (2, 3, 4)


@pytest.fixture(scope="module")
def refinement_runs():
    scene = load_scene(SCENES / "spheres.json")
    out = {}
    for level in LEVELS:
        precision = "single" if level == 4 else "double"
        for mode in ("conventional", "calderon"):
            res = cli.run_solve(cli.RunConfig(scene, mode, level=level, precision=precision))
            out[mode, level] = (res.report.iterations, res.report.converged, res.l2_error)
            del res
            gc.collect()
    return out


@pytest.mark.slow
def test_c04_accuracy_convergence(report, refinement_runs):
    r = refinement_runs
    errs = {m: [r[m, lv][2] for lv in LEVELS] for m in ("conventional", "calderon")}
    mono = all(e[0] > e[1] > e[2] for e in errs.values())
    within = all(max(a, b) <= 3 * min(a, b) for a, b in zip(errs["conventional"], errs["calderon"]))
    conv = all(r[k][1] for k in r)
    ok = mono and within and conv
    detail = "; ".join(f"{m} " + ", ".join(f"{e:.3e}" for e in v) for m, v in errs.items())
    report(4, "l2 error decreases with refinement", ok, detail)
    assert ok


@pytest.mark.slow
def test_c05_iteration_flatness(report, refinement_runs):
    r = refinement_runs
    cal = [r["calderon", lv][0] for lv in LEVELS]
    con = [r["conventional", lv][0] for lv in LEVELS]
    ok = max(cal) <= 1.5 * min(cal) and con[-1] > 1.5 * con[0]
    report(5, "calderon iterations flat", ok, f"calderon {cal}, conventional {con}")
    assert ok


# 6 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_c06_preconditioner_benefit(report):
    scene = load_scene(SCENES / "spheres.json")
    scene.graph = scene.graph.with_epsilons((1.0, 0.1, 10.0))
    meshes = scene_meshes(scene, 3)
    its = {}
    for mode in ("calderon", "jacobi", "ppm"):
        res = cli.run_solve(cli.RunConfig(scene, mode, level=3), meshes=meshes)
        its[mode] = res.report.iterations
        del res
        gc.collect()
    ok = its["jacobi"] < its["calderon"] and its["ppm"] <= its["jacobi"]
    report(6, "high-contrast preconditioning", ok, str(its))
    assert ok


# 7 ---------------------------------------------------------------------------

# configurations the tuner is known to select for the four-box composite at various eps3
FOUR_BOX_SELECTIONS = {
    "A": "G23:P1 G24:P1 G34:P2(1,2) G45:P2(5,2) G52:P1 G53:P1",
    "B": "G23:P1 G24:P1 G43:P3(1,4) G54:P1 G52:P1 G35:P2(1,2)",
    "C": "G23:P1 G24:P1 G43:P2(2,3) G54:P1 G52:P1 G35:P2(1,2)",
    "D": "G32:P2(1,2) G24:P1 G43:P1 G45:P1 G25:P1 G53:P2(4,3)",
    "E": "G32:P2(1,2) G24:P1 G43:P1 G45:P1 G25:P1 G53:P3(1,5)",
    "F": "G32:P2(1,2) G42:P1 G43:P1 G45:P1 G25:P2(1,2) G53:P3(1,5)",
    "G": "G32:P2(1,2) G42:P1 G43:P1 G45:P1 G25:P2(1,2) G53:P3(4,5)",
    "H": "G23:P1 G42:P2(1,2) G34:P1 G54:P3(1,5) G25:P1 G35:P1",
    "I": "G23:P1 G42:P2(1,2) G34:P1 G54:P2(3,4) G25:P1 G35:P1",
    "J": "G23:P1 G24:P1 G34:P2(2,4) G45:P2(1,2) G52:P1 G53:P1",
    "K": "G23:P1 G24:P1 G43:P2(1,2) G54:P2(2,4) G25:P1 G35:P3(1,2)",
    "L": "G23:P1 G24:P1 G43:P2(1,2) G54:P2(1,4) G25:P1 G35:P3(1,2)",
}


def test_c07_tuner_enumeration(report):
    t0 = time.perf_counter()
    n_spheres = len(enumerate_configs(spheres_graph((1, 2, 3))))
    g4, _ = build_scene_four_boxes()
    labels = {c.describe() for c in enumerate_configs(g4.with_omega(1.0))}
    elapsed = time.perf_counter() - t0
    missing = [k for k, v in FOUR_BOX_SELECTIONS.items() if v not in labels]
    ok = n_spheres == 6 and not missing and elapsed < 1.0
    report(7, "configuration enumeration", ok,
           f"spheres {n_spheres}, four boxes {len(labels)}, missing {missing}, {elapsed:.2f} s")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_c08_gmres_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    b = rng.normal(size=7) + 1j * rng.normal(size=7)
    ident = gmres(np.eye(7), b).iterations == 1
    diag_ok = True
    for d in (1, 2, 5):
        vals = np.repeat(rng.normal(size=d) + 1j * rng.normal(size=d) + 4, 5)
        rep = gmres(np.diag(vals), rng.normal(size=5 * d) + 0j, tol=1e-12)
        diag_ok &= rep.converged and rep.iterations <= d
    n = 50
    A = np.eye(n) * 6 + rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rhs = rng.normal(size=n) + 1j * rng.normal(size=n)
    ref = np.linalg.solve(A, rhs)
    rep = gmres(A, rhs, tol=1e-13)
    direct = np.linalg.norm(rep.solution - ref) / np.linalg.norm(ref)
    hist = np.array(rep.residual_history)
    monotone = bool(np.all(np.diff(hist) <= 0))
    elapsed = time.perf_counter() - t0
    ok = ident and diag_ok and direct <= 1e-10 and monotone and elapsed < 1.0
    report(8, "GMRES unit suite", ok, f"random rel err {direct:.1e}, {elapsed:.2f} s")
    assert ok


# 9 ---------------------------------------------------------------------------

def test_c09_oracle_self_consistency(report):
    rng = np.random.default_rng(9)
    sol = series_coefficients(5.0, (1.0, 2.0, 3.0))
    bc = 0.0
    for radius, inner, outer in ((1.0, 2, 1), (0.5, 3, 2)):
        v = rng.normal(size=(100, 3))
        x = radius * v / np.linalg.norm(v, axis=1)[:, None]
        uo, ui = eval_analytic(sol, x, region=outer), eval_analytic(sol, x, region=inner)
        fo, fi = eval_flux(sol, x, outer), eval_flux(sol, x, inner)
        bc = max(bc, np.max(np.abs(uo - ui)) / np.max(np.abs(uo)), np.max(np.abs(fo - fi)) / np.max(np.abs(fo)))
    x = np.linspace(0.1, 50, 400)
    j, dj, h, dh = bessel_pair(50, x)
    wr = np.max(np.abs((j * dh - dj * h).imag * x**2 - 1.0))
    hom = series_coefficients(5.0, (2.0, 2.0, 2.0))
    pts = rng.uniform(-1.5, 1.5, size=(300, 3))
    inc = np.max(np.abs(eval_analytic(hom, pts) - np.exp(1j * 5.0 * np.sqrt(2.0) * pts[:, 1])))
    ok = bc <= 1e-8 and wr <= 1e-10 and inc <= 1e-12
    report(9, "series oracle self-consistency", ok, f"bc {bc:.1e}, wronskian {wr:.1e}, homogeneous {inc:.1e}")
    assert ok


# 10 --------------------------------------------------------------------------

# hand-coded block pattern for B = {(1,2), (1,3), (3,2), (4,3)}: row -> (region, entries)
# e and a are epsilon and alpha of the row's region, a1 the exterior alpha
FOUR_DOMAIN_TABLE = {
    (STANDARD, 0): (2, {"u12": "-a1*(I/2-D)", "u32": "a1*D", "w12": "-a1*e*S", "w32": "-a1*e*S"}),
    (STANDARD, 1): (3, {"u13": "-a1*(I/2-D)", "u32": "-a1*D", "u43": "a1*D",
                        "w13": "-a1*e*S", "w32": "a1*e*S", "w43": "-a1*e*S"}),
    (STANDARD, 2): (2, {"u12": "a1*D", "u32": "-a1*(I/2-D)", "w12": "-a1*e*S", "w32": "-a1*e*S"}),
    (STANDARD, 3): (3, {"u13": "a1*D", "u32": "-a1*D", "u43": "-a1*(I/2-D)",
                        "w13": "-a1*e*S", "w32": "a1*e*S", "w43": "-a1*e*S"}),
    (BM, 0): (1, {"u12": "I/2+W", "u13": "W", "w12": "e*(a*I/2-V)", "w13": "-e*V"}),
    (BM, 1): (1, {"u12": "W", "u13": "I/2+W", "w12": "-e*V", "w13": "e*(a*I/2-V)"}),
    (BM, 2): (3, {"u13": "-W", "u32": "I/2+W", "u43": "-W", "w13": "e*V", "w32": "e*(a*I/2-V)", "w43": "e*V"}),
    (BM, 3): (4, {"u43": "I/2+W", "w43": "e*(a*I/2-V)"}),
}
FOUR_DOMAIN_PAIRS = [(1, 2), (1, 3), (3, 2), (4, 3)]


def test_c10_four_domain_block_structure(report):
    g = build_domain_graph([1.0, 2.0, 3.0, 4.0], FOUR_DOMAIN_PAIRS, 1.5)
    meshes = [icosphere((3.0 * b, 0, 0), 0.5 + 0.1 * b, 0) for b in range(4)]
    alphas = default_config(g).alphas
    A = assemble_system(g, meshes, alphas, "calderon")
    a1 = exterior_alpha(g)
    names = [f"{i}{j}" for i, j in FOUR_DOMAIN_PAIRS]
    worst, bad = 0.0, []
    for (kind, b), (region, entries) in FOUR_DOMAIN_TABLE.items():
        tgt = meshes[b]
        k, e = g.wavenumber(region), g.epsilon(region)
        a = alphas.get(region, 0.0)
        for dens in ("u", "w"):
            for c in range(4):
                blk = A.block(kind, b, dens, c)
                expr = entries.get(dens + names[c])
                if expr is None:
                    if np.any(blk != 0):
                        bad.append((kind, b, dens, c))
                    continue
                self_index = np.arange(len(tgt)) if c == b else np.full(len(tgt), -1)
                S, D, Ds, N = operator_blocks(tgt.centroids, tgt.normals, self_index, meshes[c], k,
                                              hypersingular=(kind == BM))
                env = {"I": np.eye(len(tgt), len(meshes[c])), "S": S, "D": D, "a1": a1, "a": a, "e": e}
                if kind == BM:
                    env["W"] = D + a * N
                    env["V"] = S + a * Ds
                want = eval(expr, {}, env)
                err = np.max(np.abs(blk - want)) / np.max(np.abs(want))
                worst = max(worst, err)
                if err > 1e-12:
                    bad.append((kind, b, dens, c))
    ok = not bad
    report(10, "four-domain block structure", ok, f"max rel {worst:.1e}, mismatched {bad}")
    assert ok
