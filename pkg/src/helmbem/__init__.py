"""Calderon-preconditioned Burton-Miller BEM for multi-region Helmholtz transmission."""
from helmbem.scene import (
    DomainGraph,
    Interface,
    Material,
    SceneFile,
    TopologyError,
    adjacency_sets,
    build_domain_graph,
    flip_interface,
    load_scene,
    save_scene,
)
from helmbem.meshgen import TriangleMesh, icosphere, build_scene_spheres
from helmbem.assembly import BlockIndexMap, SystemMatrix, assemble_rhs, assemble_system, matvec
from helmbem.spectral import (
    BieConfig,
    ClusterReport,
    Pattern,
    accumulation_points,
    check_constraints,
    dense_eigenvalues,
    enumerate_configs,
    gamma_for_pattern,
    jacobi_diagonal,
    tune,
)
from helmbem.solver import SolveReport, gmres
from helmbem.oracle import SeriesSolution, eval_analytic, l2_error, series_coefficients

__version__ = "0.1.0"
