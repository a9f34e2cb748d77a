"""Dense/labeled tensor algebra, vectorization, and (matrix-free) eigensolvers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

RANK_CUTOFF = 1e-10  # singular values below cutoff * sigma_max count as zero
HERMITIAN_TOL = 1e-12


class LinalgError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class FeasibilityError(RuntimeError):
    """Raised before allocating when a dense request would not fit."""


# -- labeled tensors ---------------------------------------------------------


@dataclass
class LabeledTensor:
    """An ndarray with named legs; the substrate for network contraction."""

    legs: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != len(self.legs):
            raise LinalgError(f"{len(self.legs)} legs for ndim {self.data.ndim}")
        if len(set(self.legs)) != len(self.legs):
            raise LinalgError(f"duplicate leg labels in {self.legs}")

    def dim(self, leg: str) -> int:
        return self.data.shape[self.legs.index(leg)]

    def rename(self, mapping: dict[str, str]) -> "LabeledTensor":
        return LabeledTensor(tuple(mapping.get(l, l) for l in self.legs), self.data)

    def transpose_to(self, order: Sequence[str]) -> "LabeledTensor":
        perm = [self.legs.index(l) for l in order]
        return LabeledTensor(tuple(order), self.data.transpose(perm))


def _pair_two(a: LabeledTensor, b: LabeledTensor, pairs: list[tuple[str, str]]) -> LabeledTensor:
    ax_a = [a.legs.index(la) for la, _ in pairs]
    ax_b = [b.legs.index(lb) for _, lb in pairs]
    for (la, lb), ia, ib in zip(pairs, ax_a, ax_b):
        if a.data.shape[ia] != b.data.shape[ib]:
            raise LinalgError(
                f"dimension mismatch contracting {la}({a.data.shape[ia]}) with {lb}({b.data.shape[ib]})"
            )
    data = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    legs = tuple(l for i, l in enumerate(a.legs) if i not in ax_a) + tuple(
        l for i, l in enumerate(b.legs) if i not in ax_b
    )
    return LabeledTensor(legs, data)


def contract(tensors: Sequence[LabeledTensor], pairings: Sequence[tuple[int, str, int, str]]) -> LabeledTensor:
    """Contract a network; `pairings` entries are (tensor_i, leg, tensor_j, leg).

    Free legs keep their labels (must stay globally unique).  The contraction
    order is greedy on the smallest intermediate size; the result does not
    depend on it.
    """
    nodes = {i: LabeledTensor(t.legs, t.data) for i, t in enumerate(tensors)}
    owner = {}  # leg label -> node id (labels stay unique across the network)
    for i, t in nodes.items():
        for leg in t.legs:
            if leg in owner:
                raise LinalgError(f"leg label {leg!r} appears on two tensors")
            owner[leg] = i
    pending = []
    for ti, la, tj, lb in pairings:
        if owner.get(la) != ti or owner.get(lb) != tj:
            raise LinalgError(f"pairing ({ti},{la})-({tj},{lb}) does not match tensor legs")
        if ti == tj:
            raise LinalgError("self-pairings (traces) are not supported; reshape first")
        pending.append((la, lb))

    def bonds_between():
        grouped: dict[tuple[int, int], list[tuple[str, str]]] = {}
        for la, lb in pending:
            i, j = owner[la], owner[lb]
            if i == j:
                raise LinalgError("pairing became internal; unsupported network")
            if i < j:
                grouped.setdefault((i, j), []).append((la, lb))
            else:
                grouped.setdefault((j, i), []).append((lb, la))
        return grouped

    while pending:
        grouped = bonds_between()

        def merged_size(key):
            i, j = key
            cdim = 1
            for la, _ in grouped[key]:
                cdim *= nodes[i].dim(la)
            return nodes[i].data.size * nodes[j].data.size // max(cdim * cdim, 1)

        i, j = min(grouped, key=merged_size)
        pairs = grouped[(i, j)]
        merged = _pair_two(nodes[i], nodes[j], pairs)
        del nodes[j]
        nodes[i] = merged
        done = {p for p in pairs} | {(b, a) for a, b in pairs}
        pending = [p for p in pending if p not in done and (p[1], p[0]) not in done]
        for leg in merged.legs:
            owner[leg] = i
    # remaining nodes: tensor product
    out = None
    for i in sorted(nodes):
        t = nodes[i]
        if out is None:
            out = t
        else:
            out = LabeledTensor(out.legs + t.legs, np.multiply.outer(out.data, t.data))
    return out


# -- vectorization -----------------------------------------------------------


def vectorize(q: np.ndarray) -> np.ndarray:
    """|Q> = (Q x 1)|Omega> with |Omega> = sum_i |ii>; row-major flatten."""
    q = np.asarray(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise LinalgError(f"vectorize needs a square matrix, got {q.shape}")
    return q.reshape(-1)


def devectorize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise LinalgError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(d, d)


def kron(*mats: np.ndarray) -> np.ndarray:
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def dagger(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).conj().T


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out all factors not in `keep` from an operator on a tensor product."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    m = np.asarray(m).reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for off, i in enumerate(traced):
        axis = i - off
        m = np.trace(m, axis1=axis, axis2=axis + (n - off))
        dims.pop(axis)
        n -= 1
        traced = [j - 1 if j > i else j for j in traced]
    d = int(np.prod([1] + dims))
    return m.reshape(d, d)


# -- spectra -----------------------------------------------------------------


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    dev = np.abs(m - dagger(m)).max()
    scale = max(1.0, np.abs(m).max())
    if dev > tol * scale:
        raise LinalgError(f"matrix is not Hermitian (deviation {dev:.3e})")


def hermitian_spectrum(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues ascending + eigenvectors of a Hermitian matrix."""
    check_hermitian(m)
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def matrix_exp_hermitian(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """e^{tM} by spectral decomposition; exact on projectors."""
    vals, vecs = hermitian_spectrum(m)
    return (vecs * np.exp(t * vals)) @ dagger(vecs)


def matrix_power_hermitian(m: np.ndarray, power: float, pseudo: bool = False) -> np.ndarray:
    """M^power via eigh; with pseudo=True, zero modes (at RANK_CUTOFF) stay zero."""
    vals, vecs = hermitian_spectrum(m)
    top = np.abs(vals).max() if vals.size else 0.0
    out = np.zeros_like(vals)
    keep = np.abs(vals) > RANK_CUTOFF * max(top, 1e-300)
    if not pseudo and (vals < 0).any() and power != int(power):
        bad = vals[vals < -RANK_CUTOFF * max(top, 1e-300)]
        if bad.size:
            raise LinalgError(f"negative eigenvalue {bad.min():.3e} in fractional matrix power")
        vals = np.clip(vals, 0.0, None)
    out[keep] = np.power(vals[keep], power)
    return (vecs * out) @ dagger(vecs)


def projector_onto_columns(v: np.ndarray, cutoff: float = RANK_CUTOFF) -> tuple[np.ndarray, int]:
    """Orthogonal projector onto the column space of v, plus its numerical rank."""
    q, s, _ = np.linalg.svd(np.asarray(v), full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((v.shape[0], v.shape[0]), dtype=complex), 0
    rank = int(np.sum(s > cutoff * s[0]))
    qr = q[:, :rank]
    return qr @ dagger(qr), rank


def orthonormal_columns(v: np.ndarray, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    q, s, _ = np.linalg.svd(np.asarray(v), full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return q[:, :0]
    rank = int(np.sum(s > cutoff * s[0]))
    return q[:, :rank]


# -- matrix-free machinery ----------------------------------------------------


@dataclass
class LinearMapHandle:
    """A Hermitian linear map given by its action on vectors."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]

    def to_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.dim, self.dim), matvec=self.apply, dtype=complex)

    def to_dense(self, limit: int = 4096) -> np.ndarray:
        if self.dim > limit:
            raise FeasibilityError(f"dense materialization of dim {self.dim} refused (limit {limit})")
        eye = np.eye(self.dim, dtype=complex)
        return np.column_stack([self.apply(eye[:, i]) for i in range(self.dim)])

    def spot_check_linearity(self, seed: int = 0, tol: float = 1e-10) -> float:
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        y = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        a, b = complex(rng.standard_normal(), rng.standard_normal()), complex(rng.standard_normal())
        lhs = self.apply(a * x + b * y)
        rhs = a * self.apply(x) + b * self.apply(y)
        dev = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if dev > tol:
            raise LinalgError(f"handle is not linear to tolerance ({dev:.3e})")
        return dev


def handle_from_dense(m: np.ndarray) -> LinearMapHandle:
    m = np.asarray(m)
    return LinearMapHandle(dim=m.shape[0], apply=lambda x: m @ x)


def lowest_eigs_matrix_free(
    h: LinearMapHandle,
    k: int = 1,
    tol: float = 1e-9,
    seed: int = 0,
    deflate: Sequence[np.ndarray] = (),
    shift: float = 100.0,
    maxiter: int | None = None,
) -> np.ndarray:
    """k lowest eigenvalues of a Hermitian PSD map, deflating the given orthonormal vectors.

    Deflation adds `shift` on the span of the supplied vectors, so the returned
    values are the lowest of H restricted to their orthogonal complement.
    """
    defl = [np.asarray(v, dtype=complex).reshape(-1) for v in deflate]
    for i, v in enumerate(defl):
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-8:
            raise LinalgError(f"deflation vector {i} is not normalized")

    def matvec(x):
        y = np.asarray(h.apply(x))
        for v in defl:
            y = y + shift * v * (v.conj() @ x)
        return y

    if h.dim <= 64:
        mat = np.column_stack([matvec(col) for col in np.eye(h.dim, dtype=complex).T])
        vals = np.linalg.eigvalsh((mat + dagger(mat)) / 2)
        return vals[:k]

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(h.dim)
    op = spla.LinearOperator((h.dim, h.dim), matvec=matvec, dtype=complex)
    try:
        vals, vecs = spla.eigsh(op, k=k, sigma=None, which="SA", v0=v0, tol=tol, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos failed to converge: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    for i in range(k):
        r = np.linalg.norm(matvec(vecs[:, i]) - vals[i] * vecs[:, i])
        if r > max(tol * 100, 1e-7) * max(1.0, abs(vals[i])):
            raise ConvergenceError(f"eigenpair {i} residual {r:.3e} above tolerance")
    return vals[:k]


def operator_norm(m, method: str = "dense", tol: float = 1e-10, seed: int = 0) -> float:
    """Largest singular value, dense or by power iteration on M^dagger M."""
    if method == "dense":
        m = np.asarray(m)
        return float(np.linalg.norm(m, 2)) if m.size else 0.0
    if method != "power-iteration":
        raise LinalgError(f"unknown norm method {method!r}")
    if isinstance(m, LinearMapHandle):
        apply, applyH, dim = m.apply, m.apply, m.dim  # Hermitian handle
    else:
        m = np.asarray(m)
        apply, applyH, dim = (lambda x: m @ x), (lambda x: dagger(m) @ x), m.shape[1]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    last = 0.0
    for _ in range(10000):
        y = applyH(apply(x))
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
        val = np.sqrt(nrm)
        if abs(val - last) <= tol * max(1.0, val):
            return float(val)
        last = val
    raise ConvergenceError(f"power iteration stalled at {last} (last gap above {tol})")


# -- random generators --------------------------------------------------------


def random_hermitian(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (m + dagger(m)) / 2


def random_state(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def principal_angle_cos(u: np.ndarray, v: np.ndarray) -> float:
    """Largest principal-angle cosine between the column spans of two isometries."""
    s = np.linalg.svd(dagger(u) @ v, compute_uv=False)
    return float(s[0]) if s.size else 0.0
