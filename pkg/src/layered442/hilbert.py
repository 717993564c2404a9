"""Dense complex linear algebra for small multipartite Hilbert spaces.

States live on a composite space with per-party dimensions ``dims``.  The
flat index is mixed-radix and row-major: the first party is the most
significant digit, so for dims (4, 4, 2) the ket ``|ijk>`` sits at index
``(i*4 + j)*2 + k``.  All objects are immutable values and all operations
are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DimVector",
    "PureState",
    "DensityOperator",
    "SchmidtData",
    "as_dim_vector",
    "basis_state",
    "haar_random_state",
    "tensor_product",
    "partial_trace",
    "schmidt_decompose",
    "schmidt_reconstruct",
    "rank_vector",
    "fidelity_pure",
]

# Largest supported composite dimension; beyond this the dense
# representation stops being sensible.
MAX_TOTAL_DIM = 4096

NORM_TOL = 1e-12
HERM_TOL = 1e-12
EIG_TOL = 1e-10

#: Ordered per-party dimensions, e.g. ``(4, 4, 2)``.
DimVector = tuple[int, ...]


def as_dim_vector(dims) -> DimVector:
    """Validate and normalize a dimension vector (every entry >= 1)."""
    out = tuple(int(d) for d in dims)
    if len(out) == 0:
        raise ValueError("dimension vector must not be empty")
    if any(d < 1 for d in out):
        raise ValueError(f"party dimensions must be >= 1, got {out}")
    return out


def _total_dim(dims: DimVector) -> int:
    total = math.prod(dims)
    if total > MAX_TOTAL_DIM:
        raise ValueError(f"total dimension {total} exceeds supported maximum {MAX_TOTAL_DIM}")
    return total


@dataclass(frozen=True)
class PureState:
    """Normalized state vector over a multipartite Hilbert space."""

    dims: DimVector
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = as_dim_vector(self.dims)
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1).copy()
        if amps.size != _total_dim(dims):
            raise ValueError(f"amplitude vector length {amps.size} does not match dims {dims}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: |norm - 1| = {abs(norm - 1.0):.3e}")
        amps.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_parties(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def index_of(self, digits) -> int:
        """Flat index of a basis ket given per-party digits."""
        digits = tuple(int(d) for d in digits)
        if len(digits) != self.num_parties:
            raise ValueError("digit count does not match party count")
        idx = 0
        for d, dim in zip(digits, self.dims):
            if not 0 <= d < dim:
                raise ValueError(f"digit {d} out of range for dimension {dim}")
            idx = idx * dim + d
        return idx

    def amplitude(self, digits) -> complex:
        return complex(self.amplitudes[self.index_of(digits)])

    def density(self) -> "DensityOperator":
        """Projector |psi><psi| as a density operator."""
        return DensityOperator(self.dims, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive-semidefinite operator."""

    dims: DimVector
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = as_dim_vector(self.dims)
        total = _total_dim(dims)
        mat = np.asarray(self.matrix, dtype=np.complex128).copy()
        if mat.shape != (total, total):
            raise ValueError(f"matrix shape {mat.shape} does not match dims {dims}")
        if np.max(np.abs(mat - mat.conj().T)) > HERM_TOL:
            raise ValueError("matrix is not Hermitian within tolerance")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"trace is {tr}, expected 1")
        lo = np.linalg.eigvalsh(mat)[0]
        if lo < -EIG_TOL:
            raise ValueError(f"matrix has negative eigenvalue {lo:.3e}")
        mat.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", mat)

    @property
    def num_parties(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()


@dataclass(frozen=True)
class SchmidtData:
    """Schmidt decomposition of a pure state across a bipartition.

    ``cut`` holds the party indices on the left side; coefficients are
    non-negative and sorted descending with sum of squares 1.  Column i of
    ``left_vectors``/``right_vectors`` is the i-th Schmidt vector on the
    respective side.
    """

    cut: tuple[int, ...]
    dims: DimVector
    coefficients: np.ndarray = field(repr=False)
    left_vectors: np.ndarray = field(repr=False)
    right_vectors: np.ndarray = field(repr=False)


def basis_state(dims, digits) -> PureState:
    """Computational basis ket |digits> for the given dims."""
    dims = as_dim_vector(dims)
    amps = np.zeros(_total_dim(dims), dtype=np.complex128)
    idx = 0
    for d, dim in zip(tuple(digits), dims):
        idx = idx * dim + int(d)
    amps[idx] = 1.0
    return PureState(dims, amps)


def haar_random_state(dims, rng: np.random.Generator) -> PureState:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    dims = as_dim_vector(dims)
    n = _total_dim(dims)
    vec = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PureState(dims, vec / np.linalg.norm(vec))


def tensor_product(a, b):
    """Kronecker product of two states or two density operators.

    The party lists are concatenated, with ``a`` holding the more
    significant digits.
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(a.dims + b.dims, np.kron(a.matrix, b.matrix))
    raise TypeError("tensor_product requires two PureStates or two DensityOperators")


def _check_parties(parties, num_parties: int) -> tuple[int, ...]:
    out = tuple(int(p) for p in parties)
    if len(out) == 0:
        raise ValueError("party subset must not be empty")
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate party indices in {out}")
    if any(p < 0 or p >= num_parties for p in out):
        raise ValueError(f"party index out of range in {out} (have {num_parties} parties)")
    return tuple(sorted(out))


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out all parties not in ``keep``; kept parties stay in order."""
    keep = _check_parties(keep, rho.num_parties)
    n = rho.num_parties
    dims = rho.dims
    tensor = rho.matrix.reshape(dims + dims)
    # Contract row/column axes pairwise for every traced party.
    row = list(range(n))
    col = list(range(n, 2 * n))
    for p in range(n):
        if p not in keep:
            col[p] = row[p]
    kept_dims = tuple(dims[p] for p in keep)
    out_axes = [row[p] for p in keep] + [col[p] for p in keep]
    reduced = np.einsum(tensor, row + col, out_axes)
    d = math.prod(kept_dims)
    return DensityOperator(kept_dims, reduced.reshape(d, d))


def _cut_matrix(psi: PureState, cut: tuple[int, ...]) -> np.ndarray:
    """Reshape amplitudes into a (cut) x (rest) matrix."""
    n = psi.num_parties
    rest = tuple(p for p in range(n) if p not in cut)
    perm = cut + rest
    tensor = psi.amplitudes.reshape(psi.dims)
    d_left = math.prod(psi.dims[p] for p in cut)
    return np.transpose(tensor, perm).reshape(d_left, -1)


def schmidt_decompose(psi: PureState, cut) -> SchmidtData:
    """Schmidt decomposition of ``psi`` across ``cut`` | complement."""
    cut = _check_parties(cut, psi.num_parties)
    if len(cut) == psi.num_parties:
        raise ValueError("cut must be a proper subset of the parties")
    mat = _cut_matrix(psi, cut)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    return SchmidtData(cut, psi.dims, s, u, vh.T)


def schmidt_reconstruct(data: SchmidtData) -> PureState:
    """Rebuild the state from its Schmidt data (inverse of the cut permutation)."""
    mat = (data.left_vectors * data.coefficients) @ data.right_vectors.T
    n = len(data.dims)
    rest = tuple(p for p in range(n) if p not in data.cut)
    perm = data.cut + rest
    shaped = mat.reshape(tuple(data.dims[p] for p in perm))
    inv = np.argsort(perm)
    return PureState(data.dims, np.transpose(shaped, inv).reshape(-1))


def rank_vector(psi: PureState, tol: float | None = None) -> DimVector:
    """Per-party Schmidt ranks (counts of coefficients above tolerance).

    The default tolerance is 1e-8 relative to the largest coefficient of
    each cut.
    """
    ranks = []
    for p in range(psi.num_parties):
        s = schmidt_decompose(psi, (p,)).coefficients
        cutoff = tol if tol is not None else 1e-8 * (s[0] if s.size else 1.0)
        ranks.append(int(np.sum(s > cutoff)))
    return tuple(ranks)


def fidelity_pure(rho: DensityOperator, target: PureState) -> float:
    """Overlap <target|rho|target>, clamped to [0, 1]."""
    if rho.dims != target.dims:
        raise ValueError(f"dimension mismatch: {rho.dims} vs {target.dims}")
    val = np.vdot(target.amplitudes, rho.matrix @ target.amplitudes).real
    return float(min(1.0, max(0.0, val)))
