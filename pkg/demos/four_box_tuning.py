"""Configuration selection for the four-box composite as eps3 varies.

For each value the tuner picks an orientation and pattern assignment; the
chosen label, its predicted cluster spread and the GMRES count on a coarse
mesh are printed next to the all-P1 Calderon baseline.
"""
from pathlib import Path

import numpy as np

from helmbem.cli import RunConfig, run_solve
from helmbem.meshgen import scene_meshes
from helmbem.scene import load_scene
from helmbem.spectral import tune

SCENE = Path(__file__).resolve().parents[1] / "scenes" / "four_boxes.json"


def main(values=(0.1, 1.0, 10.0), level=1):
    scene = load_scene(SCENE)
    graph = scene.graph
    meshes = scene_meshes(scene, level)
    for eps3 in values:
        eps = list(graph.epsilons)
        eps[2] = eps3
        scene.graph = graph.with_epsilons(eps)
        cfg, rep = tune(scene.graph)
        its = {m: run_solve(RunConfig(scene, m, level=level), meshes=meshes).report.iterations
               for m in ("calderon", "ppm")}
        print(f"eps3={eps3:<6g} ratio={rep.max_ratio:7.3f}  calderon={its['calderon']:4d} "
              f"ppm={its['ppm']:4d}  {cfg.describe()}")


if __name__ == "__main__":
    main(np.round(np.logspace(-1, 1, 5), 3))
