"""Discrete supercharges and chain Hamiltonians.

The fermionic sector ``M`` of the chain is realised on the ``M``-cells of the
cubical complex spanned by the staggered grid: sector 0 lives on nodes,
sector 1 on edges (one component per edge direction), sector 2 on faces and
so on.  The supercharge from sector ``M`` to ``M+1`` is the weighted
coboundary

    q_M = G_{M+1}^{-1} d_M G_M / (h sqrt 2),      G_k = diag(exp(w at k-cell centres)),

which reproduces ``(d_i + d_i w) / sqrt 2`` to second order at every cell
centre.  Because ``d_{M+1} d_M = 0`` on the grid, ``q_{M+1} q_M = 0`` holds to
roundoff, so the Gram products

    h^(M) = q_{M-1} q_{M-1}^T + q_M^T q_M

intertwine exactly: ``q_M h^(M) = h^(M+1) q_M``.

Coincidence planes are handled by dropping a layer of cells.  For
``gamma > 0`` every cell in the closure of a top cell crossed by a plane is
removed (Dirichlet layer, relative complex).  For ``gamma < 0`` only cells
that are themselves crossed are removed (absolute complex).  The outer box
boundary carries the natural condition of the complex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp

from .grid import Grid
from .model import ModelParams, SingularGeometry, superpotential_fields, superpotential_value

__all__ = [
    "FockSectorSpec",
    "CellBlock",
    "CubicalComplex",
    "OperatorHandle",
    "SuperchargePair",
    "MemoryGuardError",
    "build_complex",
    "build_supercharge_components",
    "build_h0",
    "build_h1",
    "build_h2",
    "build_sector",
    "assemble_chain_n4",
    "full_supercharge",
    "gram_offset",
    "explicit_scalar",
    "explicit_matrix",
    "explicit_potential",
    "laplacian",
    "resolve_condition",
    "write_coo",
    "read_coo",
]

DEFAULT_MEMORY_CAP = 4_000_000


class MemoryGuardError(MemoryError):
    """Raised when a requested 3D assembly exceeds the configured size cap."""


@dataclass(frozen=True)
class FockSectorSpec:
    n_fermionic_modes: int
    sector: int

    def __post_init__(self):
        if not 0 <= self.sector <= self.n_fermionic_modes:
            raise ValueError(f"sector must lie in [0, {self.n_fermionic_modes}]")

    @property
    def dimension(self) -> int:
        return comb(self.n_fermionic_modes, self.sector)


def resolve_condition(gamma: float, condition: str = "auto") -> str:
    """Map ``auto`` to the plane condition that selects the regular realisation."""
    if condition not in ("auto", "relative", "absolute", "none"):
        raise ValueError(f"unknown plane condition {condition!r}")
    if condition != "auto":
        return condition
    if gamma > 0:
        return "relative"
    if gamma < 0:
        return "absolute"
    return "none"


@dataclass(frozen=True)
class CellBlock:
    """All k-cells spanning the axes ``dirs``; one fermionic component."""

    dirs: tuple
    shape: tuple
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def name(self) -> str:
        return "".join(str(a + 1) for a in self.dirs) or "0"


def _slide(a: np.ndarray, axis: int, op) -> np.ndarray:
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return op(a[tuple(lo)], a[tuple(hi)])


class CubicalComplex:
    """Cells of the staggered grid with superpotential weights and plane masks."""

    def __init__(self, params: ModelParams, grid: Grid, condition: str = "auto"):
        if grid.dim != params.dim:
            raise ValueError(f"grid dimension {grid.dim} does not match N-1 = {params.dim}")
        self.params = params
        self.grid = grid
        self.geometry = SingularGeometry.for_particles(params.n_particles)
        self.condition = resolve_condition(params.gamma, condition)
        d, n = grid.dim, grid.n
        self.blocks = []
        for k in range(d + 1):
            row, off = [], 0
            for dirs in combinations(range(d), k):
                shape = tuple(n - 1 if a in dirs else n for a in range(d))
                row.append(CellBlock(dirs, shape, off))
                off += int(np.prod(shape))
            self.blocks.append(row)
        self._keep = [self._keep_mask(k) for k in range(d + 1)]

    @property
    def dim(self) -> int:
        return self.grid.dim

    def n_cells(self, k: int) -> int:
        return sum(b.size for b in self.blocks[k])

    @cached_property
    def _node_f(self) -> np.ndarray:
        pts = self.grid.points()
        return pts @ self.geometry.normals.T

    def crossed(self, block: CellBlock) -> np.ndarray:
        """True where a plane meets the closed cell (sign change or zero at a vertex)."""
        mn = mx = self._node_f
        for a in block.dirs:
            mn = _slide(mn, a, np.minimum)
            mx = _slide(mx, a, np.maximum)
        return np.any((mn <= 0) & (mx >= 0), axis=-1)

    def _keep_mask(self, k: int) -> np.ndarray:
        parts = []
        top = self.blocks[self.dim][0]
        top_crossed = self.crossed(top) if self.condition == "relative" else None
        for block in self.blocks[k]:
            if self.condition == "none":
                removed = np.zeros(block.shape, bool)
            elif self.condition == "absolute":
                removed = self.crossed(block) if k > 0 else np.zeros(block.shape, bool)
            else:
                removed = top_crossed
                for a in range(self.dim):
                    if a in block.dirs:
                        continue
                    pad = [(0, 0)] * self.dim
                    pad[a] = (1, 0)
                    lower = np.pad(removed, pad)
                    pad[a] = (0, 1)
                    removed = lower | np.pad(removed, pad)
            parts.append(~removed.ravel())
        return np.concatenate(parts)

    def keep(self, k: int) -> np.ndarray:
        return self._keep[k]

    def kept_index(self, k: int) -> np.ndarray:
        return np.flatnonzero(self._keep[k])

    def centers(self, block: CellBlock) -> np.ndarray:
        axes = [self.grid.midpoints if a in block.dirs else self.grid.axis for a in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def kept_centers(self, k: int) -> np.ndarray:
        pts = np.concatenate([self.centers(b).reshape(-1, self.dim) for b in self.blocks[k]])
        return pts[self._keep[k]]

    def weights(self, block: CellBlock) -> np.ndarray:
        """``w`` at cell centres; non-finite values (on a plane) are zeroed."""
        w = superpotential_value(self.centers(block), self.params, self.geometry)
        return np.where(np.isfinite(w), w, 0.0)

    def coboundary(self, k: int, weighted: bool = True) -> sp.csr_matrix:
        """Full (unrestricted) weighted coboundary from k-cells to (k+1)-cells."""
        if not 0 <= k < self.dim:
            raise ValueError(f"no coboundary from {k}-cells in dimension {self.dim}")
        scale = 1.0 / (self.grid.h * np.sqrt(2.0))
        low = {b.dirs: b for b in self.blocks[k]}
        wlow = {b.dirs: self.weights(b) for b in self.blocks[k]} if weighted else None
        rows, cols, vals = [], [], []
        for tb in self.blocks[k + 1]:
            wt = self.weights(tb) if weighted else None
            tidx = tb.offset + np.arange(tb.size).reshape(tb.shape)
            for m in tb.dirs:
                sdirs = tuple(a for a in tb.dirs if a != m)
                sb = low[sdirs]
                sign = -1.0 if sum(1 for a in sdirs if a < m) % 2 else 1.0
                # lower face shares the base index, upper face is shifted along m
                sl_lo = tuple(slice(0, s) for s in tb.shape)
                sl_hi = tuple(slice(1, 1 + s) if a == m else slice(0, s) for a, s in enumerate(tb.shape))
                sidx = sb.offset + np.arange(sb.size).reshape(sb.shape)
                for sl, sgn in ((sl_hi, sign), (sl_lo, -sign)):
                    if weighted:
                        val = sgn * np.exp(wlow[sdirs][sl] - wt) * scale
                    else:
                        val = np.full(tb.shape, sgn * scale)
                    rows.append(tidx.ravel())
                    cols.append(sidx[sl].ravel())
                    vals.append(val.ravel())
        shape = (self.n_cells(k + 1), self.n_cells(k))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
        )

    def supercharge(self, k: int, weighted: bool = True) -> sp.csr_matrix:
        """Coboundary restricted to kept cells on both sides."""
        with np.errstate(over="ignore", invalid="ignore"):
            full = self.coboundary(k, weighted)
        return full[self.kept_index(k + 1)][:, self.kept_index(k)].tocsr()

    def layout(self, k: int) -> list:
        """(name, slice) pairs locating each component in the kept-cell vector."""
        out, start = [], 0
        for b in self.blocks[k]:
            cnt = int(self._keep[k][b.offset : b.offset + b.size].sum())
            out.append((b.name, slice(start, start + cnt)))
            start += cnt
        return out

    def embed(self, k: int, vec: np.ndarray, fill=0.0) -> list:
        """Scatter a kept-cell vector to one full array per component."""
        full = np.full(self.n_cells(k), fill, dtype=np.result_type(vec, float))
        full[self._keep[k]] = vec
        return [full[b.offset : b.offset + b.size].reshape(b.shape) for b in self.blocks[k]]

    def restrict(self, k: int, arrays) -> np.ndarray:
        """Gather per-component full arrays into a kept-cell vector."""
        flat = np.concatenate([np.asarray(a).ravel() for a in arrays])
        return flat[self._keep[k]]

    def sample(self, k: int, func) -> np.ndarray:
        """Evaluate ``func(points, component_dirs)`` on kept k-cell centres."""
        parts = [np.asarray(func(self.centers(b), b.dirs)).ravel() for b in self.blocks[k]]
        return np.concatenate(parts)[self._keep[k]]


def build_complex(params: ModelParams, grid: Grid, condition: str = "auto") -> CubicalComplex:
    return CubicalComplex(params, grid, condition)


@dataclass
class OperatorHandle:
    """Real sparse operator on the kept cells of one sector.

    ``blocks`` lists the fermionic components as ``(name, slice)``;
    Hamiltonians are symmetric by construction (``hermitian=True``).
    """

    matrix: sp.csr_matrix
    sector: int
    blocks: list
    hermitian: bool = True
    label: str = ""
    complex: CubicalComplex | None = field(default=None, repr=False)
    offset: float = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def __matmul__(self, v):
        return self.matrix @ v

    def symmetry_defect(self) -> float:
        diff = self.matrix - self.matrix.T
        return float(abs(diff).max()) if diff.nnz else 0.0


@dataclass
class SuperchargePair:
    """Supercharge ``q`` from sector ``M`` to ``M+1`` with its transpose.

    ``components`` holds the chain operators in the usual notation: for the
    map out of the scalar sector these are ``A_k^-`` (node to k-edge), for
    the map into the top scalar sector they are ``B_l^+`` (l-edge to face),
    with ``B^+ = -q`` so that ``B_l^pm = eps_lk A_k^mp`` holds symbolically.
    """

    q: sp.csr_matrix
    sector_map: tuple
    components: list
    adjoints: list
    names: list

    @cached_property
    def qT(self) -> sp.csr_matrix:
        return self.q.T.tocsr()


def build_supercharge_components(
    params: ModelParams, grid: Grid, sector: int = 0, cx: CubicalComplex | None = None
) -> SuperchargePair:
    """Components of the supercharge from ``sector`` to ``sector + 1``.

    Examples
    --------
    >>> from calogero_susy import ModelParams, build_grid, build_supercharge_components
    >>> pair = build_supercharge_components(ModelParams(), build_grid(7.5, 32))
    >>> pair.names
    ['A1-', 'A2-']
    """
    cx = cx or CubicalComplex(params, grid)
    q = cx.supercharge(sector)
    top = sector + 1 == cx.dim
    comps, names = [], []
    if sector == 0:
        for name, sl in cx.layout(1):
            comps.append(q[sl])
            names.append(f"A{name}-")
    elif top and cx.dim == 2:
        for name, sl in cx.layout(1):
            comps.append(-q[:, sl])
            names.append(f"B{name}+")
    else:
        comps, names = [q], [f"q({sector},{sector + 1})"]
    adj = [c.T.tocsr() for c in comps]
    return SuperchargePair(q, (sector, sector + 1), [c.tocsr() for c in comps], adj, names)


def gram_offset(params: ModelParams, sector: int) -> float:
    """Constant ``c`` with ``h_Gram = h_explicit + c`` for the closed-form potentials.

    The explicit forms carry ``8 N^2 alpha^2 |y|^2`` plus the inverse-square
    terms and, for matrix sectors, the ``4 N alpha gamma P`` shift.  Scalar
    sectors omit every constant.
    """
    n, a, g, p = params.n_particles, params.alpha, params.gamma, params.n_pairs
    d = params.dim
    base = 4.0 * n * a * g * p - 2.0 * n * a * d + 4.0 * n * a * sector
    if 0 < sector < d:
        return base - 4.0 * n * a * g * p
    return base


def _sector_hamiltonian(cx: CubicalComplex, sector: int, label: str) -> OperatorHandle:
    d = cx.dim
    mat = None
    if sector > 0:
        qd = cx.supercharge(sector - 1)
        mat = (qd @ qd.T).tocsr()
    if sector < d:
        qu = cx.supercharge(sector)
        up = (qu.T @ qu).tocsr()
        mat = up if mat is None else (mat + up).tocsr()
    mat.sort_indices()
    return OperatorHandle(mat, sector, cx.layout(sector), True, label, cx)


def build_sector(params: ModelParams, grid: Grid, sector: int, cx: CubicalComplex | None = None) -> OperatorHandle:
    cx = cx or CubicalComplex(params, grid)
    if not 0 <= sector <= cx.dim:
        raise ValueError(f"sector must lie in [0, {cx.dim}], got {sector}")
    return _sector_hamiltonian(cx, sector, f"h{sector}")


def build_h0(params: ModelParams, grid: Grid, cx: CubicalComplex | None = None) -> OperatorHandle:
    """Factorized ``h^(0) = sum_k A_k^+ A_k^-`` on the kept nodes."""
    return build_sector(params, grid, 0, cx)


def build_h1(params: ModelParams, grid: Grid, cx: CubicalComplex | None = None) -> OperatorHandle:
    """Matrix Hamiltonian ``A_i^- A_k^+ + B_i^- B_k^+`` on the kept edges."""
    return build_sector(params, grid, 1, cx)


def build_h2(params: ModelParams, grid: Grid, cx: CubicalComplex | None = None) -> OperatorHandle:
    """Second scalar Hamiltonian ``sum_l B_l^+ B_l^-`` on the kept faces (N=3)."""
    if params.dim != 2:
        raise ValueError("build_h2 is the top scalar sector of the three-body chain")
    return build_sector(params, grid, 2, cx)


def assemble_chain_n4(
    params: ModelParams, grid: Grid, memory_cap: int = DEFAULT_MEMORY_CAP, cx: CubicalComplex | None = None
) -> list:
    """``[h0, h1, h2, h3]`` for four particles on a 3D grid."""
    if params.n_particles != 4 or grid.dim != 3:
        raise ValueError("assemble_chain_n4 needs n_particles=4 and a 3D grid")
    if 3 * grid.n**3 > memory_cap:
        raise MemoryGuardError(f"3 n^3 = {3 * grid.n**3} exceeds cap {memory_cap}")
    cx = cx or CubicalComplex(params, grid)
    return [_sector_hamiltonian(cx, m, f"h{m}") for m in range(4)]


def full_supercharge(cx: CubicalComplex) -> tuple:
    """Block supercharge on the direct sum of all sectors and its block offsets."""
    sizes = [len(cx.kept_index(k)) for k in range(cx.dim + 1)]
    grid_blocks = [[None] * (cx.dim + 1) for _ in range(cx.dim + 1)]
    for k in range(cx.dim + 1):
        grid_blocks[k][k] = sp.csr_matrix((sizes[k], sizes[k]))
    for k in range(cx.dim):
        grid_blocks[k + 1][k] = cx.supercharge(k)
    return sp.bmat(grid_blocks, format="csr"), np.cumsum([0] + sizes)


# ---------------------------------------------------------------------------
# Closed-form (coefficient) operators on a collocated tensor grid


def laplacian(axis: np.ndarray, dim: int, keep: np.ndarray | None = None, order: int = 2) -> sp.csr_matrix:
    """Central-difference Laplacian with Dirichlet closure (zero outside the box).

    ``order=2`` is the standard ``2 dim + 1`` point stencil, ``order=4`` the
    five-point-per-axis stencil.  Points with ``keep == False`` act as zero
    boundary values.
    """
    n = len(axis)
    h = axis[1] - axis[0]
    one = np.ones(n)
    if order == 2:
        d1 = sp.diags([one[1:], -2.0 * one, one[1:]], [-1, 0, 1]) / h**2
    elif order == 4:
        d1 = sp.diags(
            [-one[2:] / 12, 4 * one[1:] / 3, -2.5 * one, 4 * one[1:] / 3, -one[2:] / 12], [-2, -1, 0, 1, 2]
        ) / h**2
    else:
        raise ValueError("order must be 2 or 4")
    eye = sp.identity(n, format="csr")
    lap = None
    for a in range(dim):
        factors = [d1 if b == a else eye for b in range(dim)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f, format="csr")
        lap = term if lap is None else lap + term
    lap = lap.tocsr()
    if keep is not None:
        idx = np.flatnonzero(keep.ravel())
        lap = lap[idx][:, idx].tocsr()
    return lap


def explicit_potential(params: ModelParams, points: np.ndarray, sector: int = 0, form: str = "derived") -> np.ndarray:
    """Potential of the closed-form sector Hamiltonian at ``points``.

    Scalar sectors return shape ``points.shape[:-1]``; the one-form sector
    returns a ``(..., d, d)`` matrix field.  ``form='printed'`` reproduces the
    published three-body Pauli display verbatim, ``'derived'`` is the Witten
    form ``(|grad w|^2 - lap w)/2 + Hess w`` with its constants collected.
    """
    geometry = SingularGeometry.for_particles(params.n_particles)
    f = geometry.values(points)
    n, a, g = params.n_particles, params.alpha, params.gamma
    harm = 8.0 * n * n * a * a * np.sum(points * points, axis=-1)
    inv2 = 1.0 / (f * f)
    d = params.dim
    if sector == 0 or sector == d:
        coup = g * (g + 1.0) if sector == 0 else g * (g - 1.0)
        return harm + 0.5 * coup * inv2.sum(axis=-1)
    if sector != 1:
        raise ValueError("closed forms exist for scalar sectors and the one-form sector")
    eye = np.eye(d)
    const = 4.0 * n * a * g * params.n_pairs
    if form == "printed":
        if n != 3:
            raise ValueError("printed Pauli form is the three-body display")
        s1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        s3 = np.array([[1.0, 0.0], [0.0, -1.0]])
        r = np.sqrt(3.0) / 2.0
        nums = [
            g * g * eye - g * s3,
            g * g * eye - 0.5 * g * s3 - r * g * s1,
            g * g * eye - 0.5 * g * s3 + r * g * s1,
        ]
    elif form == "derived":
        nums = [0.5 * g * (g + 1.0) * eye - g * np.outer(nrm, nrm) for nrm in geometry.normals]
    else:
        raise ValueError(f"unknown form {form!r}")
    out = (harm + const)[..., None, None] * eye
    for p, num in enumerate(nums):
        out = out + inv2[..., p, None, None] * num
    return out


def _tensor_points(axis: np.ndarray, dim: int) -> np.ndarray:
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1)


def explicit_scalar(
    params: ModelParams, axis: np.ndarray, sector: int = 0, keep: np.ndarray | None = None
) -> sp.csr_matrix:
    """``-lap/2 + V`` on the tensor grid built from ``axis`` (Dirichlet)."""
    d = params.dim
    pts = _tensor_points(axis, d)
    pot = explicit_potential(params, pts, sector).ravel()
    lap = laplacian(axis, d)
    mat = (-0.5 * lap + sp.diags(pot)).tocsr()
    if keep is not None:
        idx = np.flatnonzero(keep.ravel())
        mat = mat[idx][:, idx].tocsr()
    return mat


def explicit_matrix(params: ModelParams, axis: np.ndarray, form: str = "derived") -> sp.csr_matrix:
    """Collocated ``d``-component one-form Hamiltonian, component-major ordering."""
    d = params.dim
    pts = _tensor_points(axis, d)
    pot = explicit_potential(params, pts, 1, form).reshape(-1, d, d)
    lap = laplacian(axis, d)
    kin = sp.kron(sp.identity(d), -0.5 * lap, format="csr")
    pot_blocks = [[sp.diags(pot[:, i, j]) for j in range(d)] for i in range(d)]
    return (kin + sp.bmat(pot_blocks, format="csr")).tocsr()


def witten_potential_fields(params: ModelParams, points: np.ndarray) -> tuple:
    """Scalar part ``(|grad w|^2 - lap w)/2`` and Hessian at ``points``."""
    _, grad, hess = superpotential_fields(points, params)
    lapw = np.trace(hess, axis1=-2, axis2=-1)
    return 0.5 * (np.sum(grad * grad, axis=-1) - lapw), hess


# ---------------------------------------------------------------------------
# Portable sparse export

_COO_MAGIC = "SUSYCOO1"


def write_coo(path, op: OperatorHandle, binary: bool = False) -> None:
    """Text header ``dims nnz block_count`` then COO triplets.

    With ``binary=True`` the triplets follow the header as a little-endian
    payload of ``i8 row, i8 col, f8 value`` records.
    """
    coo = op.matrix.tocoo()
    header = f"{_COO_MAGIC} {coo.shape[0]} {coo.shape[1]} {coo.nnz} {op.block_count} {'binary' if binary else 'text'}\n"
    if binary:
        rec = np.empty(coo.nnz, dtype=[("r", "<i8"), ("c", "<i8"), ("v", "<f8")])
        rec["r"], rec["c"], rec["v"] = coo.row, coo.col, coo.data
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(rec.tobytes())
        return
    with open(path, "w") as fh:
        fh.write(header)
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")


def read_coo(path) -> tuple:
    """Inverse of :func:`write_coo`; returns ``(csr_matrix, block_count)``."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if header[0] != _COO_MAGIC:
            raise ValueError("not a sparse export file")
        nr, nc, nnz, blocks = map(int, header[1:5])
        if header[5] == "binary":
            rec = np.frombuffer(fh.read(), dtype=[("r", "<i8"), ("c", "<i8"), ("v", "<f8")], count=nnz)
            r, c, v = rec["r"], rec["c"], rec["v"]
        else:
            data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
            r, c, v = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2]
    return sp.csr_matrix((v, (r, c)), shape=(nr, nc)), blocks

