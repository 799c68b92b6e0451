"""Dense collocation system for the multi-region transmission problem.

Unknowns are the piecewise-constant traces u and fluxes w = (1/eps) du/dn on
every interface, with n pointing from the interface's first region into its
second.  For an interface (i, j) two equations are collocated at its element
centroids:

* the standard equation, written with the kernels of region j,

      u/2 - sum_{p in T_j^-} (D u_pj - eps_j S w_pj)
          + sum_{p in T_j^+} (D u_jp - eps_j S w_jp) = 0,

  multiplied through by -alpha_1;

* the Burton-Miller equation, written with the kernels of region i,

      u/2 + alpha_i eps_i w/2
          + sum_{p in T_i^+} ((D + alpha_i N) u_ip - eps_i (S + alpha_i D*) w_ip)
          - sum_{p in T_i^-} ((D + alpha_i N) u_pi - eps_i (S + alpha_i D*) w_pi)
          = delta_{i1} (u_in + alpha_1 eps_1 w_in).

T_i^+ are the regions that region i's interfaces point into and T_i^- the
regions whose interfaces point into region i.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from helmbem.kernels import incident_plane_wave, operator_blocks
from helmbem.scene import DomainGraph

STANDARD = "standard"
BM = "bm"


class AssemblyError(ValueError):
    pass


def exterior_alpha(graph: DomainGraph) -> complex:
    """alpha_1 = -i / k_1."""
    return -1j / graph.wavenumber(1)


def bm_regions(graph: DomainGraph) -> list[int]:
    """Regions that own at least one Burton-Miller equation."""
    return sorted({itf.from_region for itf in graph.interfaces})


def conventional_alphas(graph: DomainGraph) -> dict:
    """alpha_1 = -i/k_1 and zero for every other region."""
    return {r: (exterior_alpha(graph) if r == 1 else 0.0) for r in bm_regions(graph)}


def alphas_from_gammas(graph: DomainGraph, gammas: dict) -> dict:
    a1 = exterior_alpha(graph)
    return {r: a1 * gammas.get(r, 1.0 if r == 1 else np.nan) for r in bm_regions(graph)}


@dataclass(frozen=True)
class BlockIndexMap:
    """Block layout of the system.

    ``row_blocks[q] = (equation kind, interface index)`` and
    ``col_blocks[q] = (density kind, interface index)``.  ``offsets`` are the
    element offsets of each interface inside one density half.
    """

    pairs: tuple
    sizes: tuple
    bm_first: bool = False

    @property
    def num_interfaces(self) -> int:
        return len(self.pairs)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)

    @property
    def n_total(self) -> int:
        return int(sum(self.sizes))

    @property
    def dim(self) -> int:
        return 2 * self.n_total

    @property
    def row_blocks(self) -> list:
        nb = range(self.num_interfaces)
        halves = [STANDARD, BM] if not self.bm_first else [BM, STANDARD]
        return [(kind, b) for kind in halves for b in nb]

    @property
    def col_blocks(self) -> list:
        nb = range(self.num_interfaces)
        return [(dens, b) for dens in ("u", "w") for b in nb]

    def _half_slice(self, half: int, b: int) -> slice:
        off = self.offsets
        base = half * self.n_total
        return slice(base + int(off[b]), base + int(off[b + 1]))

    def row_slice(self, kind: str, b: int) -> slice:
        half = 0 if (kind == STANDARD) != self.bm_first else 1
        return self._half_slice(half, b)

    def col_slice(self, density: str, b: int) -> slice:
        return self._half_slice(0 if density == "u" else 1, b)

    def block_of_column(self, q: int):
        return self.col_blocks[q]

    def block_position(self, index: int):
        """(block number, offset within block) for a global row/column index."""
        half, local = divmod(int(index), self.n_total)
        b = int(np.searchsorted(self.offsets, local, side="right") - 1)
        return half * self.num_interfaces + b, local - int(self.offsets[b])


@dataclass
class SystemMatrix:
    data: np.ndarray
    index: BlockIndexMap
    mode: str = "calderon"

    @property
    def shape(self):
        return self.data.shape

    def block(self, row_kind: str, b: int, density: str, c: int) -> np.ndarray:
        return self.data[self.index.row_slice(row_kind, b), self.index.col_slice(density, c)]

    def check_finite(self):
        if not np.all(np.isfinite(self.data)):
            raise AssemblyError("assembled matrix has non-finite entries")


def block_index_map(graph: DomainGraph, meshes, mode: str = "calderon") -> BlockIndexMap:
    _check_meshes(graph, meshes)
    return BlockIndexMap(tuple(graph.pairs), tuple(len(m) for m in meshes), bm_first=(mode == "conventional"))


def _check_meshes(graph, meshes):
    if meshes is None or len(meshes) != graph.num_interfaces:
        have = 0 if meshes is None else len(meshes)
        raise AssemblyError(f"need one mesh per interface: {graph.num_interfaces} interfaces, {have} meshes")
    for b, m in enumerate(meshes):
        if m is None or len(m) == 0:
            raise AssemblyError(f"missing mesh for interface {graph.pairs[b]}")


def row_terms(graph: DomainGraph, kind: str, b: int):
    """Column couplings of one block row.

    Returns ``(region, [(c, sign)])``: the kernels of ``region`` act on every
    interface ``c`` bounding it with ``sign`` = +1 for interfaces pointing out
    of the region and -1 for those pointing in.
    """
    i, j = graph.pairs[b]
    region = j if kind == STANDARD else i
    terms = []
    for c, (p, q) in enumerate(graph.pairs):
        if p == region:
            terms.append((c, 1.0))
        elif q == region:
            terms.append((c, -1.0))
    return region, terms


def assemble_system(graph: DomainGraph, meshes, bm_alphas: dict, mode: str = "calderon",
                    dtype=np.complex128, row_chunk: int = 512) -> SystemMatrix:
    """Dense system matrix.

    ``mode="calderon"`` gives the standard rows first, scaled by -alpha_1.
    ``mode="conventional"`` puts the Burton-Miller rows first and leaves the
    standard rows unscaled.  Rows are assembled in chunks of ``row_chunk``
    collocation points in double precision and stored in ``dtype``.
    """
    if mode not in ("calderon", "conventional"):
        raise AssemblyError(f"unknown assembly mode {mode!r}")
    index = block_index_map(graph, meshes, mode)
    for r in bm_regions(graph):
        if r not in bm_alphas or bm_alphas[r] is None or not np.isfinite(bm_alphas[r]):
            raise AssemblyError(f"missing Burton-Miller coefficient for region {r}")
    a1 = exterior_alpha(graph)
    row_scale = -a1 if mode == "calderon" else 1.0
    A = np.zeros((index.dim, index.dim), dtype=dtype)
    for b in range(graph.num_interfaces):
        pts = meshes[b].centroids
        nrm = meshes[b].normals
        for kind in (STANDARD, BM):
            region, terms = row_terms(graph, kind, b)
            k = graph.wavenumber(region)
            eps = graph.epsilon(region)
            alpha = bm_alphas[region] if kind == BM else 0.0
            scale = row_scale if kind == STANDARD else 1.0
            rs = index.row_slice(kind, b)
            for start in range(0, len(pts), row_chunk):
                stop = min(start + row_chunk, len(pts))
                rows = slice(rs.start + start, rs.start + stop)
                for c, sign in terms:
                    self_index = np.arange(start, stop) if c == b else np.full(stop - start, -1)
                    S, D, Ds, N = operator_blocks(pts[start:stop], nrm[start:stop], self_index, meshes[c], k,
                                                  hypersingular=(kind == BM and alpha != 0))
                    if kind == STANDARD:
                        ub, wb = D, -eps * S
                    elif alpha != 0:
                        ub, wb = D + alpha * N, -eps * (S + alpha * Ds)
                    else:
                        ub, wb = D, -eps * S
                    cu = index.col_slice("u", c)
                    cw = index.col_slice("w", c)
                    A[rows, cu] = (scale * sign) * ub
                    A[rows, cw] = (scale * sign) * wb
            # free terms on the diagonal of the self blocks
            cu = index.col_slice("u", b)
            cw = index.col_slice("w", b)
            diag = np.arange(rs.stop - rs.start)
            A[rs.start + diag, cu.start + diag] += scale * 0.5
            if kind == BM:
                A[rs.start + diag, cw.start + diag] += alpha * eps * 0.5
    out = SystemMatrix(A, index, mode)
    out.check_finite()
    return out


def assemble_rhs(graph: DomainGraph, meshes, incident, mode: str = "calderon") -> np.ndarray:
    """Right-hand side for a plane wave with unit propagation ``incident``.

    Only Burton-Miller rows of interfaces leaving region 1 are nonzero.
    """
    index = block_index_map(graph, meshes, mode)
    d = np.asarray(getattr(incident, "direction", incident), dtype=float)
    a1 = exterior_alpha(graph)
    k1 = graph.wavenumber(1)
    eps1 = graph.epsilon(1)
    rhs = np.zeros(index.dim, dtype=np.complex128)
    for b, (i, _j) in enumerate(graph.pairs):
        if i != 1:
            continue
        u, w = incident_plane_wave(k1, eps1, d, meshes[b].centroids, meshes[b].normals)
        rhs[index.row_slice(BM, b)] = u + a1 * eps1 * w
    return rhs


def matvec(A: SystemMatrix, x) -> np.ndarray:
    """A x, computed in the storage precision of A."""
    x = np.asarray(x)
    if x.shape != (A.shape[1],):
        raise ValueError(f"vector of length {x.shape} does not match matrix of shape {A.shape}")
    if A.data.dtype == np.complex64:
        return (A.data @ x.astype(np.complex64)).astype(np.complex128)
    return A.data @ x


def split_solution(index: BlockIndexMap, x):
    """Per-interface (u, w) arrays from a solution vector."""
    return [(x[index.col_slice("u", b)], x[index.col_slice("w", b)]) for b in range(index.num_interfaces)]
