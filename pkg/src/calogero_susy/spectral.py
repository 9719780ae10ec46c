"""Eigensolvers, spectral pairing, intertwining maps and refinement studies."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operators import OperatorHandle, SuperchargePair

__all__ = [
    "EigenSet",
    "PairingReport",
    "IntertwineResult",
    "ConvergenceReport",
    "NonConvergenceError",
    "eigensolve",
    "canonical_sign",
    "pair_spectra",
    "cluster_gaps",
    "intertwine_eigenfunction",
    "convergence_study",
    "richardson",
    "write_eigenset",
    "read_eigenset",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 4096
MAGIC = b"SUSYEIG1"


class NonConvergenceError(RuntimeError):
    """Eigensolver failed; ``best`` holds the best-so-far :class:`EigenSet`."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass
class EigenSet:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def __getitem__(self, i):
        return float(self.eigenvalues[i]), self.eigenvectors[:, i]

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]


def canonical_sign(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry (first one on ties) is positive."""
    vecs = np.array(vecs, copy=True)
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _as_matrix(op):
    return op.matrix if isinstance(op, OperatorHandle) else sp.csr_matrix(op) if sp.issparse(op) else op


def eigensolve(
    op,
    k: int,
    tol: float = 1e-8,
    sigma: float | None = -1.0,
    max_iter: int | None = None,
    seed: int = 0,
    dense_limit: int = DENSE_LIMIT,
) -> EigenSet:
    """Lowest ``k`` eigenpairs of a real symmetric operator.

    Small problems go to dense LAPACK.  Larger ones use implicitly restarted
    Lanczos (ARPACK) in shift-invert mode around ``sigma`` with a sparse LU
    factorisation; ``sigma=None`` switches to plain smallest-algebraic mode.
    ``tol`` bounds the true residual ``||H v - lambda v||`` relative to
    ``max(1, |lambda|)``.

    Examples
    --------
    >>> import numpy as np, scipy.sparse as sp
    >>> es = eigensolve(sp.diags(np.arange(10.0)), k=3)
    >>> np.round(es.eigenvalues, 12).tolist()
    [0.0, 1.0, 2.0]
    """
    mat = _as_matrix(op)
    n = mat.shape[0]
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < dim, got k={k}, dim={n}")
    if n <= dense_limit:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        vals, vecs = sla.eigh(dense, subset_by_index=(0, k - 1))
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        ncv = min(n - 1, max(2 * k + 1, k + 32))
        kwargs = dict(k=k, ncv=ncv, v0=v0, tol=tol * 1e-2, maxiter=max_iter or 50 * n)
        try:
            if sigma is None:
                vals, vecs = spla.eigsh(mat, which="SA", **kwargs)
            else:
                shifted = (mat - sigma * sp.identity(n, format="csc")).tocsc()
                lu = spla.splu(shifted)
                opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=mat.dtype)
                vals, vecs = spla.eigsh(mat, sigma=sigma, which="LM", OPinv=opinv, **kwargs)
        except spla.ArpackNoConvergence as exc:
            best = None
            if len(exc.eigenvalues):
                best = _finish(mat, exc.eigenvalues, exc.eigenvectors, {})
            raise NonConvergenceError(f"Lanczos did not converge: {exc}", best) from exc
    es = _finish(mat, vals, vecs, {"solver": "dense" if n <= dense_limit else "lanczos", "sigma": sigma})
    bound = tol * np.maximum(1.0, np.abs(es.eigenvalues))
    if np.any(es.residuals > bound):
        raise NonConvergenceError(f"residual {es.residuals.max():.3e} above tolerance {tol}", es)
    return es


def _finish(mat, vals, vecs, meta) -> EigenSet:
    order = np.argsort(vals, kind="stable")
    vals = np.asarray(vals)[order]
    vecs = canonical_sign(np.asarray(vecs)[:, order])
    res = np.linalg.norm(mat @ vecs - vecs * vals, axis=0)
    return EigenSet(vals, vecs, res, dict(meta))


# ---------------------------------------------------------------------------


@dataclass
class PairingReport:
    matched: list
    unmatched: list
    tolerance: float
    mode: str = "spacing"

    @property
    def max_gap(self) -> float:
        return max((m[3] for m in self.matched), default=0.0)

    @property
    def all_matched(self) -> bool:
        return not self.unmatched

    def counts(self) -> dict:
        out = {"h0": 0, "h2": 0}
        for m in self.matched:
            out[m[1]] += 1
        return out


def _local_spacing(levels: np.ndarray, cluster: float) -> np.ndarray:
    """Distance from each level to the nearest level outside its own cluster.

    Levels closer than ``cluster * max(1, spread)`` share a cluster, which
    keeps the measure invariant under a common shift.
    """
    out = np.empty(len(levels))
    width = cluster * max(1.0, float(np.ptp(levels)))
    for i, lam in enumerate(levels):
        d = np.abs(levels - lam)
        d = d[d > width]
        out[i] = d.min() if d.size else 1.0
    return out


def pair_spectra(e1, e0, e2, tol: float = 1e-2, mode: str = "spacing", cluster: float = 1e-3) -> PairingReport:
    """Greedy multiplicity-aware match of ``h1`` levels into ``spec(h0) U spec(h2)``.

    Each scalar level is used at most once.  The relative gap divides the
    absolute mismatch by the local level spacing of the union (``mode='spacing'``)
    or by ``max(1, |lambda|)`` (``mode='value'``).  Only gaps strictly below
    ``tol`` count as matches, so ``tol=0`` is a degenerate control.
    """
    vals = lambda e: np.asarray(getattr(e, "eigenvalues", e), dtype=float)
    l1, l0, l2 = vals(e1), vals(e0), vals(e2)
    pool = np.concatenate([l0, l2])
    src = ["h0"] * len(l0) + ["h2"] * len(l2)
    if mode == "spacing":
        scale = _local_spacing(pool, cluster) if len(pool) else pool
    elif mode == "value":
        scale = np.maximum(1.0, np.abs(pool))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    used = np.zeros(len(pool), bool)
    matched, unmatched = [], []
    for lam in l1:
        if not len(pool) or used.all():
            unmatched.append((float(lam), float("inf")))
            continue
        gaps = np.abs(pool - lam) / scale
        gaps[used] = np.inf
        j = int(np.argmin(gaps))
        if gaps[j] < tol:
            used[j] = True
            matched.append((float(lam), src[j], float(pool[j]), float(gaps[j])))
        else:
            unmatched.append((float(lam), float(gaps[j])))
    return PairingReport(matched, unmatched, tol, mode)


def cluster_gaps(levels, width: float = 0.4) -> np.ndarray:
    """Gaps between the means of consecutive level clusters and the lowest one.

    Levels closer than ``width`` to their predecessor join its cluster, so a
    lattice-split multiplet counts once.  The last cluster is dropped since
    a truncated eigenvalue list may cut it short.
    """
    lv = np.sort(np.asarray(levels, dtype=float))
    if lv.size == 0:
        return lv
    breaks = np.flatnonzero(np.diff(lv) >= width) + 1
    means = np.array([g.mean() for g in np.split(lv, breaks)])[:-1]
    return means[1:] - means[0] if means.size else means


# ---------------------------------------------------------------------------


@dataclass
class IntertwineResult:
    vector: np.ndarray
    residual: float
    energy: float
    norm_ratio: float
    annihilated: bool


def intertwine_eigenfunction(
    energy: float,
    psi: np.ndarray,
    charge: SuperchargePair,
    direction: str,
    target: OperatorHandle,
    h: float,
) -> IntertwineResult:
    """Push an eigenvector through the supercharge and test it against ``target``.

    ``direction='up'`` applies ``q`` (``A^-`` out of the scalar sector,
    ``B^+`` into the top sector); ``'down'`` applies ``q^T``.  The output is
    flagged as annihilated when its norm drops below ``10 h**2`` times the
    input norm.
    """
    if direction == "up":
        out = charge.q @ psi
    elif direction == "down":
        out = charge.qT @ psi
    else:
        raise ValueError("direction must be 'up' or 'down'")
    nin = float(np.linalg.norm(psi))
    nout = float(np.linalg.norm(out))
    ratio = nout / nin if nin else 0.0
    annihilated = ratio < 10.0 * h * h
    if nout == 0.0:
        return IntertwineResult(out, float("nan"), float("nan"), 0.0, True)
    out = out / nout
    hv = target.matrix @ out
    rq = float(out @ hv)
    res = float(np.linalg.norm(hv - energy * out))
    return IntertwineResult(out, res, rq, ratio, annihilated)


# ---------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    grids: list
    values: np.ndarray
    orders: np.ndarray
    extrapolated: np.ndarray
    monotone: np.ndarray

    @property
    def within_expected(self) -> np.ndarray:
        return (self.orders >= 1.5) & (self.orders <= 2.5)


def richardson(coarse: np.ndarray, fine: np.ndarray, ratio: float, order: float = 2.0) -> np.ndarray:
    """Extrapolate two levels assuming error ``C h**order``."""
    f = ratio**order
    return (f * np.asarray(fine) - np.asarray(coarse)) / (f - 1.0)


def convergence_study(builder, grids) -> ConvergenceReport:
    """Observed order and extrapolated limit from the three finest grids.

    ``builder(n)`` returns an array of eigenvalues.  For spacings
    ``h1 > h2 > h3`` the order solves
    ``(l1 - l2) / (l2 - l3) = (h1**p - h2**p) / (h2**p - h3**p)``.
    """
    grids = sorted(grids)
    if len(grids) < 3:
        raise ValueError("convergence_study needs at least three grid sizes")
    vals = np.array([np.asarray(builder(n), dtype=float) for n in grids])
    n1, n2, n3 = grids[-3:]
    l1, l2, l3 = vals[-3:]
    d12, d23 = l1 - l2, l2 - l3
    monotone = np.sign(d12) == np.sign(d23)
    orders = np.full(l1.shape, np.nan)
    h1, h2, h3 = 1.0 / n1, 1.0 / n2, 1.0 / n3
    for i in range(len(l1)):
        if not monotone[i] or d23[i] == 0:
            continue
        target = d12[i] / d23[i]
        g = lambda p: (h1**p - h2**p) / (h2**p - h3**p) - target
        lo, hi = 0.05, 8.0
        if g(lo) * g(hi) > 0:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(lo) * g(mid) <= 0:
                hi = mid
            else:
                lo = mid
        orders[i] = 0.5 * (lo + hi)
    if not monotone.all():
        warnings.warn(f"non-monotone convergence in levels {np.flatnonzero(~monotone).tolist()}", RuntimeWarning)
    p = np.where(np.isfinite(orders), orders, 2.0)
    r = n3 / n2
    extrap = l3 + (l3 - l2) / (r**p - 1.0)
    return ConvergenceReport(list(grids), vals, orders, extrap, monotone)


# ---------------------------------------------------------------------------


def write_eigenset(path, es: EigenSet, meta: dict | None = None) -> str:
    """Binary cache plus JSON sidecar; returns the sha256 of the binary file."""
    path = Path(path)
    vals = np.ascontiguousarray(es.eigenvalues, dtype="<f8")
    vecs = np.asfortranarray(es.eigenvectors, dtype="<f8")
    res = np.ascontiguousarray(es.residuals, dtype="<f8")
    payload = b"".join(
        [
            MAGIC,
            np.array([vecs.shape[0], len(vals)], dtype="<u8").tobytes(),
            vals.tobytes(),
            vecs.tobytes(order="F"),
            res.tobytes(),
        ]
    )
    path.write_bytes(payload)
    digest = hashlib.sha256(payload).hexdigest()
    side = dict(es.meta)
    side.update(meta or {})
    side.update({"sha256": digest, "dim": int(vecs.shape[0]), "k": int(len(vals))})
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(side, indent=2, sort_keys=True, default=str))
    return digest


def read_eigenset(path, verify: bool = True) -> EigenSet:
    path = Path(path)
    payload = path.read_bytes()
    if payload[:8] != MAGIC:
        raise ValueError("bad magic")
    side_path = path.with_suffix(path.suffix + ".json")
    meta = json.loads(side_path.read_text()) if side_path.exists() else {}
    if verify and meta.get("sha256") != hashlib.sha256(payload).hexdigest():
        raise ValueError(f"content hash mismatch for {path}")
    dim, k = (int(v) for v in np.frombuffer(payload, dtype="<u8", count=2, offset=8))
    off = 24
    vals = np.frombuffer(payload, dtype="<f8", count=k, offset=off).copy()
    off += 8 * k
    vecs = np.frombuffer(payload, dtype="<f8", count=dim * k, offset=off).reshape((dim, k), order="F").copy()
    off += 8 * dim * k
    res = np.frombuffer(payload, dtype="<f8", count=k, offset=off).copy()
    return EigenSet(vals, vecs, res, meta)
