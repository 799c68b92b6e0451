"""Predicted spectrum of the Calderon-ordered system and parameter tuning.

For the b-th interface (i, j) the squared operator has accumulation points

    lambda_b      = (alpha_1^2 / 4) (1 + gamma_i eps_j)
    lambda_{b+NB} = (alpha_1^2 / 4) (gamma_i^2 eps_i^2 + gamma_i eps_j)

with gamma_i = alpha_i / alpha_1 (gamma_1 = 1).  The patterns pick gamma_i:

    P1  gamma_i = 1 / eps_i                       pairs lambda_b with lambda_{b+NB}
    P2  gamma_i = gamma_k eps_l / eps_j            merges lambda_b into lambda_{ref}
    P3  gamma_i^2 eps_i^2 + gamma_i eps_j = 1 + gamma_k eps_l
                                                  merges lambda_{b+NB} into lambda_{ref}

where (k, l) is the reference interface and region k already uses P1 (or
is region 1).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from helmbem.scene import DomainGraph, TopologyError, flip_interface

RATIO_RTOL = 1e-12
_RANK = {"P1": 0, "P2": 1, "P3": 2}


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Pattern:
    kind: str = "P1"
    ref: int | None = None

    def __post_init__(self):
        if self.kind not in _RANK:
            raise SpectralError(f"unknown pattern {self.kind!r}")
        if (self.kind == "P1") != (self.ref is None):
            raise SpectralError("P1 takes no reference interface, P2/P3 need one")

    def label(self, graph: DomainGraph | None = None) -> str:
        if self.ref is None:
            return self.kind
        if graph is None:
            return f"{self.kind}[{self.ref}]"
        k, l = graph.pairs[self.ref]
        return f"{self.kind}({k},{l})"


P1 = Pattern("P1")


@dataclass
class BieConfig:
    """An oriented graph plus a pattern for every region that owns BM equations.

    ``flips[b]`` records whether interface ``b`` is reversed relative to the
    base graph the config was generated from.
    """

    graph: DomainGraph
    patterns: dict
    flips: tuple = ()
    gammas: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.flips:
            self.flips = (False,) * self.graph.num_interfaces
        if not self.gammas:
            self.gammas = compute_gammas(self.graph, self.patterns)

    @property
    def alpha1(self) -> complex:
        return -1j / self.graph.wavenumber(1)

    @property
    def alphas(self) -> dict:
        a1 = self.alpha1
        return {r: a1 * g for r, g in self.gammas.items()}

    @property
    def num_flips(self) -> int:
        return int(sum(self.flips))

    def pattern_of(self, region: int) -> Pattern:
        return self.patterns.get(region, P1)

    def describe(self) -> str:
        parts = []
        for b, (i, j) in enumerate(self.graph.pairs):
            if i == 1:
                continue
            parts.append(f"G{i}{j}:{self.pattern_of(i).label(self.graph)}")
        return " ".join(parts) if parts else "exterior only"

    def to_dict(self) -> dict:
        return {
            "interfaces": [list(p) for p in self.graph.pairs],
            "flips": list(self.flips),
            "patterns": {str(r): {"kind": p.kind, "ref": p.ref} for r, p in sorted(self.patterns.items())},
            "gammas": {str(r): g for r, g in sorted(self.gammas.items())},
        }


def outward(graph: DomainGraph, region: int) -> list[int]:
    """Positions in the interface list of the interfaces leaving ``region``."""
    return graph.outward_index.get(region, [])


def bm_owners(graph: DomainGraph) -> list[int]:
    """Regions other than 1 that own a Burton-Miller equation."""
    return sorted(r for r in graph.outward_index if r != 1)


def default_config(graph: DomainGraph) -> BieConfig:
    """All-P1 on the graph as given."""
    return BieConfig(graph, {r: P1 for r in bm_owners(graph)})


def _reference_gamma(graph, patterns, ref):
    k, _l = graph.pairs[ref]
    if k == 1:
        return 1.0
    if patterns.get(k, P1).kind != "P1":
        raise SpectralError(f"reference interface {graph.pairs[ref]} does not start in a P1 region")
    return 1.0 / graph.epsilon(k)


def gamma_for_pattern(config_or_graph, interface_index: int, pattern: Pattern | None = None,
                      patterns: dict | None = None) -> float:
    """gamma_i for the region owning interface ``interface_index``.

    Accepts a :class:`BieConfig` or a graph plus an explicit pattern.
    """
    if isinstance(config_or_graph, BieConfig):
        graph = config_or_graph.graph
        patterns = config_or_graph.patterns
    else:
        graph = config_or_graph
        patterns = patterns or {}
    i, j = graph.pairs[interface_index]
    if i == 1:
        return 1.0
    pat = pattern if pattern is not None else patterns.get(i, P1)
    eps_i, eps_j = graph.epsilon(i), graph.epsilon(j)
    if pat.kind == "P1":
        return 1.0 / eps_i
    ref = pat.ref
    if not 0 <= ref < graph.num_interfaces or ref == interface_index:
        raise SpectralError(f"invalid reference interface {ref} for {graph.pairs[interface_index]}")
    k, l = graph.pairs[ref]
    if k == i:
        raise SpectralError("a region cannot reference its own interface")
    gk = _reference_gamma(graph, patterns, ref)
    target = gk * graph.epsilon(l)
    if pat.kind == "P2":
        gamma = target / eps_j
    else:
        # positive root of eps_i^2 g^2 + eps_j g - (1 + target) = 0
        disc = eps_j * eps_j + 4.0 * eps_i * eps_i * (1.0 + target)
        gamma = 2.0 * (1.0 + target) / (eps_j + math.sqrt(disc))
    if not gamma > 0:
        raise SpectralError(f"non-positive gamma {gamma} for region {i}")
    return gamma


def compute_gammas(graph: DomainGraph, patterns: dict) -> dict:
    gammas = {1: 1.0} if outward(graph, 1) else {}
    for r in bm_owners(graph):
        outs = outward(graph, r)
        gammas[r] = gamma_for_pattern(graph, outs[0], patterns.get(r, P1), patterns)
    return gammas


@dataclass
class ClusterReport:
    lambdas: np.ndarray
    max_ratio: float

    @cached_property
    def distinct_points(self) -> list:
        return distinct(self.lambdas)

    @property
    def num_interfaces(self) -> int:
        return len(self.lambdas) // 2


def distinct(values, rtol: float = 1e-9) -> list:
    out = []
    for v in values:
        if not any(abs(v - w) <= rtol * max(abs(v), abs(w)) for w in out):
            out.append(complex(v))
    return out


def cluster_lambdas(graph: DomainGraph, gammas: dict) -> np.ndarray:
    a1 = -1j / graph.wavenumber(1)
    c = a1 * a1 / 4.0
    nb = graph.num_interfaces
    lam = np.empty(2 * nb, dtype=complex)
    for b, (i, j) in enumerate(graph.pairs):
        g = gammas[i]
        ei, ej = graph.epsilon(i), graph.epsilon(j)
        lam[b] = c * (1.0 + g * ej)
        lam[b + nb] = c * (g * g * ei * ei + g * ej)
    return lam


def accumulation_points(config: BieConfig) -> ClusterReport:
    lam = cluster_lambdas(config.graph, config.gammas)
    mags = np.abs(lam)
    if np.any(mags == 0):
        raise SpectralError("zero accumulation point: the operator acquires a zero eigenvalue")
    return ClusterReport(lam, float(mags.max() / mags.min()))


def check_constraints(config: BieConfig) -> list[str]:
    """Violations of C1 (multi-outward regions use P1) and C2."""
    return _violations(config.graph, config.patterns)


def _violations(graph: DomainGraph, patterns: dict, first_only: bool = False) -> list[str]:
    problems = []
    owners = bm_owners(graph)
    for r in owners:
        pat = patterns.get(r, P1)
        if pat.kind == "P1":
            continue
        outs = outward(graph, r)
        if len(outs) >= 2:
            problems.append(f"C1: region {r} has {len(outs)} outward interfaces and must use P1")
        ref = pat.ref
        if ref is None or not 0 <= ref < graph.num_interfaces or ref in outs:
            problems.append(f"region {r}: invalid reference interface {ref}")
            continue
        k, l = graph.pairs[ref]
        if k != 1 and patterns.get(k, P1).kind != "P1":
            problems.append(f"region {r}: reference {graph.pairs[ref]} starts in non-P1 region {k}")
        own_l = graph.pairs[outs[0]][1]
        # regions whose eps enters gamma_r, other than r itself and its own l
        for q in sorted({k, l}):
            if q in (1, r, own_l) or q not in graph.outward_index:
                continue
            if patterns.get(q, P1).kind != "P1":
                problems.append(f"C2: eps_{q} enters gamma_{r} so region {q} must use P1")
        if first_only and problems:
            return problems
    return problems


def _region_options(graph: DomainGraph, region: int) -> list[Pattern]:
    outs = outward(graph, region)
    opts = [P1]
    if len(outs) != 1:
        return opts
    for ref, (k, _l) in enumerate(graph.pairs):
        if ref == outs[0] or k == region:
            continue
        opts.append(Pattern("P2", ref))
        opts.append(Pattern("P3", ref))
    return opts


def enumerate_configs(graph: DomainGraph) -> list[BieConfig]:
    """Every admissible (orientation, pattern assignment) over ``graph``.

    Interior interfaces are tried in both orientations; exterior ones are
    kept.  Candidates violating C1/C2 or yielding non-positive gammas are
    dropped.
    """
    interior = graph.interior_interfaces()
    configs = []
    for mask in itertools.product((False, True), repeat=len(interior)):
        g = graph
        for b, flip in zip(interior, mask):
            if flip:
                g = flip_interface(g, b)
        flips = [False] * graph.num_interfaces
        for b, flip in zip(interior, mask):
            flips[b] = flip
        owners = bm_owners(g)
        for choice in itertools.product(*(_region_options(g, r) for r in owners)):
            patterns = dict(zip(owners, choice))
            if _violations(g, patterns, first_only=True):
                continue
            try:
                configs.append(BieConfig(g, patterns, tuple(flips)))
            except SpectralError:
                continue
    return configs


def _tie_key(cfg: BieConfig):
    ranks = tuple(_RANK[cfg.pattern_of(i).kind] if i != 1 else 0 for (i, _j) in cfg.graph.pairs)
    refs = tuple(-1 if cfg.pattern_of(i).ref is None or i == 1 else cfg.pattern_of(i).ref
                 for (i, _j) in cfg.graph.pairs)
    return (cfg.num_flips, ranks, tuple(cfg.flips), refs)


def rank_configs(graph: DomainGraph):
    """All admissible configs with their reports, best first."""
    rows = []
    for cfg in enumerate_configs(graph):
        try:
            rows.append((cfg, accumulation_points(cfg)))
        except SpectralError:
            continue
    if not rows:
        raise SpectralError("no admissible configuration")
    best = min(r.max_ratio for _c, r in rows)

    def key(row):
        cfg, rep = row
        near_best = rep.max_ratio <= best * (1.0 + RATIO_RTOL)
        return (0 if near_best else 1, rep.max_ratio if not near_best else 0.0, _tie_key(cfg))

    return sorted(rows, key=key)


def tune(graph: DomainGraph):
    """Config minimizing the spread of accumulation-point magnitudes.

    Ties (relative 1e-12) go to fewer flips, then P1 over P2 over P3 in
    interface order.
    """
    cfg, rep = rank_configs(graph)[0]
    return cfg, rep


@dataclass
class JacobiDiagonal:
    """Block-constant diagonal of M^-1: ``scales[q]`` for column block q."""

    scales: np.ndarray

    def vector(self, index) -> np.ndarray:
        out = np.empty(index.dim, dtype=complex)
        for q, (dens, b) in enumerate(index.col_blocks):
            out[index.col_slice(dens, b)] = self.scales[q]
        return out


def jacobi_diagonal(report: ClusterReport) -> JacobiDiagonal:
    lam = np.asarray(report.lambdas, dtype=complex)
    if np.any(lam == 0):
        raise SpectralError("cannot precondition a zero accumulation point")
    return JacobiDiagonal(1.0 / np.sqrt(lam))


def preconditioned_points(report: ClusterReport, diag: JacobiDiagonal) -> np.ndarray:
    """Accumulation points of (A M^-1)^2, i.e. lambda_b (1/sqrt(lambda_b))^2."""
    return np.asarray(report.lambdas) * diag.scales**2


def dense_eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a dense matrix (LAPACK Hessenberg QR)."""
    data = np.asarray(getattr(A, "data", A), dtype=complex)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ValueError("need a square matrix")
    try:
        return np.linalg.eigvals(data)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigenvalue iteration did not converge: {exc}") from exc


def cluster_fraction(squared_eigs, points, radius: float) -> float:
    """Fraction of values within ``radius`` of any predicted point."""
    z = np.asarray(squared_eigs)[:, None]
    p = np.asarray(points)[None, :]
    return float(np.mean(np.min(np.abs(z - p), axis=1) <= radius))


def config_from_dict(base: DomainGraph, data: dict) -> BieConfig:
    """Rebuild a config from ``BieConfig.to_dict`` output or a looser form.

    ``data`` may give ``flips`` (list of bools over the base interface list)
    or ``interfaces`` (oriented pairs), plus ``patterns`` mapping region ids
    to ``"P1"`` or ``{"kind": "P2", "ref": 0}``.
    """
    g = base
    if "interfaces" in data:
        want = [tuple(p) for p in data["interfaces"]]
        flips = []
        for b, (pair, itf) in enumerate(zip(want, base.pairs)):
            if pair == itf:
                flips.append(False)
            elif pair == itf[::-1]:
                g = flip_interface(g, b)
                flips.append(True)
            else:
                raise TopologyError(f"interface {pair} does not match base {itf}")
    else:
        flips = [bool(f) for f in data.get("flips", [False] * base.num_interfaces)]
        for b, f in enumerate(flips):
            if f:
                g = flip_interface(g, b)
    patterns = {}
    for r, p in data.get("patterns", {}).items():
        patterns[int(r)] = Pattern(p) if isinstance(p, str) else Pattern(p["kind"], p.get("ref"))
    for r in bm_owners(g):
        patterns.setdefault(r, P1)
    cfg = BieConfig(g, patterns, tuple(flips))
    problems = check_constraints(cfg)
    if problems:
        raise SpectralError("; ".join(problems))
    return cfg
