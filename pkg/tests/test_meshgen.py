import json
import math
from pathlib import Path

import numpy as np
import pytest

from helmbem.meshgen import (
    FOUR_BOX_PAIRS,
    FOUR_BOXES,
    MeshError,
    TriangleMesh,
    box_union_meshes,
    build_scene_spheres,
    build_scene_two_cuboids,
    cuboid_mesh,
    icosphere,
    load_mesh,
    orient_meshes,
    save_mesh,
    scene_meshes,
)
from helmbem.scene import flip_interface, load_scene

SCENES = Path(__file__).resolve().parents[1] / "scenes"


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_icosphere_counts_and_radius(level):
    m = icosphere(radius=0.5, subdivisions=level)
    assert len(m) == 20 * 4**level
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 0.5)
    # closed surface: every edge shared by exactly two triangles
    edges = np.sort(np.concatenate([m.triangles[:, [0, 1]], m.triangles[:, [1, 2]], m.triangles[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)
    # outward winding
    assert np.all(np.sum(m.normals * m.centroids, axis=1) > 0)


def test_icosphere_area_converges():
    deficits = [4 * math.pi - icosphere(subdivisions=s).total_area() for s in range(4)]
    assert all(d > 0 for d in deficits)
    assert all(b < a for a, b in zip(deficits, deficits[1:]))


def test_spheres_scene_orientation():
    g, (outer, inner) = build_scene_spheres(subdivisions=1)
    # Gamma_12 points from the host into the shell, Gamma_32 from the core into the shell
    assert np.all(np.sum(outer.normals * outer.centroids, axis=1) < 0)
    assert np.all(np.sum(inner.normals * inner.centroids, axis=1) > 0)
    assert g.pairs == [(1, 2), (3, 2)]


def test_flip_reverses_normals():
    m = icosphere(subdivisions=1)
    assert np.allclose(m.flipped().normals, -m.normals)
    assert np.allclose(m.flipped().centroids, m.centroids)


def test_cuboid_mesh():
    m = cuboid_mesh((0, 0, 0), (1, 1, 1))
    assert len(m) == 12
    m2 = cuboid_mesh((0, 0, 0), (1, 1, 1), (2, 2, 2))
    assert len(m2) == 48
    assert m2.total_area() == pytest.approx(6.0)
    c = m2.centroids - 0.5
    assert np.all(np.sum(m2.normals * c, axis=1) > 0)


def test_two_cuboids_patches():
    g, meshes = build_scene_two_cuboids(divisions=1)
    areas = [m.total_area() for m in meshes]
    assert areas == pytest.approx([5.0, 5.0, 1.0])
    # shared face x = 0 oriented from region 3 (x > 0) into region 2: normal -x
    assert np.allclose(meshes[2].normals, [-1, 0, 0])
    # exterior patches point into the boxes
    c = meshes[0].centroids - np.array([-0.5, 0, 0])
    assert np.all(np.sum(meshes[0].normals * c, axis=1) < 0)


def test_four_boxes_patches():
    meshes = box_union_meshes(FOUR_BOXES, FOUR_BOX_PAIRS, divisions=1)
    assert len(meshes) == 10
    total = {p: m.total_area() for p, m in zip(FOUR_BOX_PAIRS, meshes)}
    assert total[(2, 3)] == pytest.approx(1.0)
    assert total[(4, 5)] == pytest.approx(1.0)
    assert total[(2, 4)] + total[(5, 2)] == pytest.approx(2.0)
    n23 = meshes[FOUR_BOX_PAIRS.index((2, 3))].normals
    assert np.allclose(n23, [0, 1, 0])
    n24 = meshes[FOUR_BOX_PAIRS.index((2, 4))].normals
    assert np.allclose(n24, [0, 0, 1])


def test_undeclared_contact_is_an_error():
    with pytest.raises(MeshError):
        box_union_meshes(FOUR_BOXES, FOUR_BOX_PAIRS[:-1], divisions=1)


def test_orient_meshes_follows_flips():
    g, meshes = build_scene_spheres(subdivisions=1)
    f = flip_interface(g, 1)
    out = orient_meshes(g, f, meshes)
    assert out[0] is meshes[0]
    assert np.allclose(out[1].normals, -meshes[1].normals)


def test_validate_rejects_degenerate():
    with pytest.raises(MeshError):
        TriangleMesh(np.zeros((3, 3)), [[0, 1, 2]]).validate()
    with pytest.raises(MeshError):
        TriangleMesh(np.eye(3), [[0, 1, 5]]).validate()


def test_mesh_file_roundtrip(tmp_path):
    m = icosphere(subdivisions=1)
    save_mesh(m, tmp_path / "m.json")
    back = load_mesh(tmp_path / "m.json")
    assert np.allclose(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
    (tmp_path / "bad.json").write_text(json.dumps({"vertices": [], "triangles": []}))
    with pytest.raises(MeshError):
        load_mesh(tmp_path / "bad.json")


def test_scene_file_meshes_match_builders():
    sc = load_scene(SCENES / "spheres.json")
    meshes = scene_meshes(sc, 1)
    _, ref = build_scene_spheres(subdivisions=1)
    for a, b in zip(meshes, ref):
        assert np.allclose(a.normals, b.normals)
    four = scene_meshes(load_scene(SCENES / "four_boxes.json"), 1)
    assert len(four) == 10
