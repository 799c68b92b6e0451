"""Domain topology: regions, material constants and oriented interfaces.

Region ids are 1-based and region 1 is the unbounded host medium.  An
interface ``(i, j)`` carries a normal pointing from region ``i`` into region
``j``; no interface may point into region 1.  The interface list is ordered
and that order fixes the block layout of the assembled system.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence


class TopologyError(ValueError):
    """Raised for an inconsistent region/interface declaration."""


@dataclass(frozen=True)
class Material:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise TopologyError(f"material constant must be positive, got {self.epsilon}")

    def wavenumber(self, omega: float) -> float:
        return omega * math.sqrt(self.epsilon)


@dataclass(frozen=True)
class Interface:
    from_region: int
    to_region: int
    patch: str = ""

    @property
    def pair(self) -> tuple[int, int]:
        return (self.from_region, self.to_region)

    def flipped(self) -> "Interface":
        return Interface(self.to_region, self.from_region, self.patch)

    def touches_exterior(self) -> bool:
        return self.from_region == 1 or self.to_region == 1


@dataclass(frozen=True)
class AdjacencySets:
    all: frozenset
    outward: frozenset
    inward: frozenset


@dataclass(frozen=True)
class DomainGraph:
    """Validated multi-region topology.

    ``materials[0]`` belongs to region 1; use :meth:`epsilon` for 1-based
    lookup.
    """

    materials: tuple
    interfaces: tuple
    omega: float

    @property
    def num_regions(self) -> int:
        return len(self.materials)

    @property
    def num_interfaces(self) -> int:
        return len(self.interfaces)

    @cached_property
    def pairs(self) -> list[tuple[int, int]]:
        return [itf.pair for itf in self.interfaces]

    def epsilon(self, region: int) -> float:
        if not 1 <= region <= len(self.materials):
            self._check_region(region)
        return self.materials[region - 1].epsilon

    def wavenumber(self, region: int) -> float:
        return self.omega * math.sqrt(self.epsilon(region))

    @property
    def epsilons(self) -> tuple[float, ...]:
        return tuple(m.epsilon for m in self.materials)

    def _check_region(self, region: int):
        if not 1 <= region <= self.num_regions:
            raise TopologyError(f"unknown region id {region} (have 1..{self.num_regions})")

    def adjacency(self, region: int) -> AdjacencySets:
        return adjacency_sets(self, region)

    @cached_property
    def outward_index(self) -> dict:
        """Region id -> positions of the interfaces leaving it."""
        out = {}
        for b, itf in enumerate(self.interfaces):
            out.setdefault(itf.from_region, []).append(b)
        return out

    def interior_interfaces(self) -> list[int]:
        """Positions in the interface list that do not touch region 1."""
        return [b for b, itf in enumerate(self.interfaces) if not itf.touches_exterior()]

    def with_epsilons(self, epsilons: Sequence[float]) -> "DomainGraph":
        return build_domain_graph(epsilons, self.interfaces, self.omega)

    def with_omega(self, omega: float) -> "DomainGraph":
        return build_domain_graph(self.epsilons, self.interfaces, omega)


def _as_interface(spec) -> Interface:
    if isinstance(spec, Interface):
        return spec
    if isinstance(spec, dict):
        return Interface(int(spec["from"]), int(spec["to"]), str(spec.get("mesh", "")))
    i, j, *rest = spec
    return Interface(int(i), int(j), str(rest[0]) if rest else "")


def build_domain_graph(materials: Iterable, interface_specs: Iterable, omega: float) -> DomainGraph:
    """Validate and freeze a region/interface declaration.

    ``materials`` may hold :class:`Material` objects or bare positive numbers
    (region 1 first).  Interface specs may be ``Interface`` objects,
    ``(from, to[, patch])`` tuples or ``{"from", "to", "mesh"}`` dicts.  The
    interface order is kept exactly as given.
    """
    mats = tuple(m if isinstance(m, Material) else Material(float(m)) for m in materials)
    if len(mats) < 2:
        raise TopologyError("need at least two regions")
    if not omega > 0:
        raise TopologyError(f"angular frequency must be positive, got {omega}")
    itfs = tuple(_as_interface(s) for s in interface_specs)
    M = len(mats)
    seen = set()
    for itf in itfs:
        i, j = itf.pair
        for r in (i, j):
            if not 1 <= r <= M:
                raise TopologyError(f"interface {itf.pair} references unknown region {r}")
        if i == j:
            raise TopologyError(f"self-loop interface {itf.pair}")
        if j == 1:
            raise TopologyError(f"interface {itf.pair} is oriented into region 1")
        key = frozenset((i, j))
        if key in seen:
            raise TopologyError(f"duplicate interface between regions {i} and {j}")
        seen.add(key)
    return DomainGraph(mats, itfs, float(omega))


def adjacency_sets(graph: DomainGraph, region_i: int) -> AdjacencySets:
    graph._check_region(region_i)
    out = frozenset(j for (i, j) in graph.pairs if i == region_i)
    inn = frozenset(i for (i, j) in graph.pairs if j == region_i)
    return AdjacencySets(out | inn, out, inn)


def flip_interface(graph: DomainGraph, index: int) -> DomainGraph:
    """Reverse the orientation of the interface at ``index`` in the list."""
    if not 0 <= index < graph.num_interfaces:
        raise IndexError(f"interface index {index} out of range")
    itf = graph.interfaces[index]
    if itf.from_region == 1:
        raise TopologyError(f"cannot flip exterior interface {itf.pair}")
    itfs = list(graph.interfaces)
    itfs[index] = itf.flipped()
    return DomainGraph(graph.materials, tuple(itfs), graph.omega)


@dataclass
class SceneFile:
    """Parsed scene description (JSON on disk)."""

    graph: DomainGraph
    direction: tuple = (0.0, 1.0, 0.0)
    geometry: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path)


def scene_from_dict(data: dict, base_dir=".") -> SceneFile:
    regions = sorted(data["regions"], key=lambda r: int(r["id"]))
    ids = [int(r["id"]) for r in regions]
    if ids != list(range(1, len(ids) + 1)):
        raise TopologyError(f"region ids must be 1..M without gaps, got {ids}")
    graph = build_domain_graph([float(r["epsilon"]) for r in regions], data["interfaces"], float(data["omega"]))
    direction = tuple(float(c) for c in data.get("incident", {}).get("direction", (0.0, 1.0, 0.0)))
    return SceneFile(graph, direction, dict(data.get("geometry", {})), Path(base_dir))


def scene_to_dict(scene: SceneFile) -> dict:
    g = scene.graph
    out = {
        "omega": g.omega,
        "regions": [{"id": r + 1, "epsilon": m.epsilon} for r, m in enumerate(g.materials)],
        "interfaces": [{"from": itf.from_region, "to": itf.to_region, "mesh": itf.patch} for itf in g.interfaces],
        "incident": {"direction": list(scene.direction)},
    }
    if scene.geometry:
        out["geometry"] = scene.geometry
    return out


def load_scene(path) -> SceneFile:
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    return scene_from_dict(data, path.parent)


def save_scene(scene: SceneFile, path):
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)
