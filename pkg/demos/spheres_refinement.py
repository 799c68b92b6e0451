"""Conventional vs Calderon on the concentric-spheres benchmark.

Prints iterations and l2 error against the series solution for a few mesh
levels.  Level 3 takes a minute or two on one core; pass a smaller maximum
level on the command line for a quick look.
"""
import sys
from pathlib import Path

from helmbem.cli import RunConfig, run_solve
from helmbem.scene import load_scene

SCENE = Path(__file__).resolve().parents[1] / "scenes" / "spheres.json"


def main(max_level=3):
    scene = load_scene(SCENE)
    print(f"{'level':>5} {'elements':>9} {'mode':>13} {'iters':>6} {'l2 error':>10}")
    for level in range(1, max_level + 1):
        for mode in ("conventional", "calderon", "ppm"):
            res = run_solve(RunConfig(scene, mode, level=level))
            n = sum(len(m) for m in res.meshes)
            print(f"{level:5d} {n:9d} {mode:>13} {res.report.iterations:6d} {res.l2_error:10.3e}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
