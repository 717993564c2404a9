"""Dimensionality certification for the layered three-photon state.

A state is certified (4, 4, 2)-entangled when its fidelity with the ideal
layered target exceeds the best overlap any state of a lower dimensionality
class can reach.  The class bound follows from truncated Schmidt
decompositions across the single-party cuts; for the (4, 3, 2) class and
the layered target the bound is exactly 3/4.

Fidelity itself is assembled from 32 diagonal and 6 unique real
off-diagonal density-matrix elements, the off-diagonals being decomposed
into two-level sigma_x / sigma_y correlators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .hilbert import PureState, haar_random_state, schmidt_decompose

__all__ = [
    "ALL_KETS",
    "SIGNAL_KETS",
    "OFFDIAG_PAIRS",
    "FMAX_BOUND",
    "GME_BOUND",
    "ElementEstimate",
    "RankVectorClass",
    "Certification",
    "max_overlap_bounded_rank",
    "fmax_class_bound",
    "fidelity_from_elements",
    "offdiag_from_correlators",
    "offdiag_from_pair_correlators",
    "subspace_fidelity",
    "ghz_witness_value",
    "gme_witnessed",
    "certify_dimensionality",
    "search_class_overlap",
]

SIGNAL_KETS = ("000", "111", "220", "331")

#: All computational kets of the (4, 4, 2) space in flat-index order.
ALL_KETS = tuple(f"{i}{j}{k}" for i in range(4) for j in range(4) for k in range(2))

#: The six unique coherence pairs of the layered target, bra < ket.
OFFDIAG_PAIRS = tuple(itertools.combinations(SIGNAL_KETS, 2))

#: Maximal overlap of any (4,3,2)-class state with the layered target.
FMAX_BOUND = 0.75

#: Subspace fidelity above which genuine multipartite entanglement is witnessed.
GME_BOUND = 0.5

# Tolerance for renormalizing a diagonal set whose sum drifted from 1.
DIAG_SUM_TOL = 0.02


@dataclass(frozen=True)
class ElementEstimate:
    """One estimated density-matrix element (real part) with its error."""

    bra: str
    ket: str
    value: float
    std_dev: float = 0.0
    low_stats: bool = False

    def __post_init__(self):
        if self.std_dev < 0:
            raise ValueError("std_dev must be non-negative")
        if self.bra == self.ket and not -1e-9 <= self.value <= 1 + 1e-9:
            raise ValueError(f"diagonal element {self.value} outside [0, 1]")

    @property
    def is_diagonal(self) -> bool:
        return self.bra == self.ket

    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.bra, self.ket)))


@dataclass(frozen=True)
class RankVectorClass:
    """Dimensionality class given by per-party rank caps, e.g. (4, 3, 2).

    The certified set is the convex hull over all party permutations of
    the caps that remain compatible with the local dimensions; for caps
    (4, 3, 2) on dims (4, 4, 2) these are (4, 3, 2) and (3, 4, 2).
    """

    ranks: tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        if any(r < 1 for r in ranks):
            raise ValueError(f"rank caps must be >= 1, got {ranks}")
        object.__setattr__(self, "ranks", ranks)

    def members(self, dims) -> tuple[tuple[int, ...], ...]:
        dims = tuple(dims)
        if len(self.ranks) != len(dims):
            raise ValueError("rank vector length does not match party count")
        found = {
            perm
            for perm in itertools.permutations(self.ranks)
            if all(r <= d for r, d in zip(perm, dims))
        }
        if not found:
            raise ValueError(f"no permutation of {self.ranks} fits dims {dims}")
        return tuple(sorted(found))


@dataclass(frozen=True)
class Certification:
    """Outcome of comparing a measured fidelity against a class bound."""

    f_exp: float
    std_dev: float
    bound: float
    sigma_margin: float
    certified: bool


def max_overlap_bounded_rank(target: PureState, cut, rank: int) -> float:
    """Best overlap with ``target`` of any state of bounded Schmidt rank.

    Equal to the sum of the ``rank`` largest squared Schmidt coefficients
    of the target across the cut.
    """
    data = schmidt_decompose(target, cut)
    full = data.coefficients.size
    if not 1 <= rank <= full:
        raise ValueError(f"rank must lie in 1..{full}, got {rank}")
    return float(min(1.0, np.sum(data.coefficients[:rank] ** 2)))


def fmax_class_bound(target: PureState, cls: RankVectorClass) -> float:
    """Fidelity bound of a rank-vector class against ``target``.

    For each class member the overlap is limited by every single-party
    cut, so the member bound is the minimum over cuts; the class bound is
    the maximum over members.
    """
    best = 0.0
    for member in cls.members(target.dims):
        member_bound = min(
            max_overlap_bounded_rank(target, (p,), cap) for p, cap in enumerate(member)
        )
        best = max(best, member_bound)
    return best


def _index_elements(elements) -> dict:
    table = {}
    for e in elements:
        table[e.pair()] = e
    return table


def fidelity_from_elements(diagonals, offdiagonals) -> float:
    """Assemble the target fidelity from measured matrix elements.

    Requires all 32 diagonal estimates and the 6 unique real off-diagonal
    parts.  Diagonals are renormalized to unit sum (allowed drift 2%);
    off-diagonals are taken as measured, each already normalized within
    its own measurement setting.
    """
    diag = _index_elements(diagonals)
    for ket in ALL_KETS:
        if (ket, ket) not in diag:
            raise ValueError(f"missing diagonal element |{ket}><{ket}|")
    total = sum(diag[(k, k)].value for k in ALL_KETS)
    if abs(total - 1.0) > DIAG_SUM_TOL:
        raise ValueError(f"diagonal elements sum to {total:.4f}, outside the 2% band")
    off = _index_elements(offdiagonals)
    for pair in OFFDIAG_PAIRS:
        if pair not in off:
            raise ValueError(f"missing off-diagonal element |{pair[0]}><{pair[1]}|")
    diag_sum = sum(diag[(k, k)].value for k in SIGNAL_KETS) / total
    off_sum = sum(off[p].value for p in OFFDIAG_PAIRS)
    return (diag_sum + 2.0 * off_sum) / 4.0


def _check_expectation(name: str, value: float):
    if not -1.0 - 1e-9 <= value <= 1.0 + 1e-9:
        raise ValueError(f"expectation {name} = {value} outside [-1, 1]")


def offdiag_from_correlators(exp_xxx: float, exp_yyx: float, exp_yxy: float, exp_xyy: float) -> float:
    """Real part of a three-party coherence from four sigma correlators.

    The signed operator sum sigma_xxx - sigma_yyx - sigma_yxy - sigma_xyy
    on the two-level subspaces equals 4(|ijk><lmn| + |lmn><ijk|), so with
    expectation values taken over the full outcome distribution the real
    part carries a factor 1/8.
    """
    for name, val in (("xxx", exp_xxx), ("yyx", exp_yyx), ("yxy", exp_yxy), ("xyy", exp_xyy)):
        _check_expectation(name, val)
    return (exp_xxx - exp_yyx - exp_yxy - exp_xyy) / 8.0


def offdiag_from_pair_correlators(exp_xx: float, exp_yy: float) -> float:
    """Real part of a two-party coherence (third party diagonal).

    Here sigma_xx - sigma_yy = 2(|ij><lm| + |lm><ij|) on the relevant
    subspace, giving a factor 1/4.
    """
    _check_expectation("xx", exp_xx)
    _check_expectation("yy", exp_yy)
    return (exp_xx - exp_yy) / 4.0


def subspace_fidelity(diag_ijk: float, diag_lmn: float, offdiag: float,
                      renormalize: bool = True) -> float:
    """Fidelity with (|ijk> + |lmn>)/sqrt(2) inside its two-level subspace.

    With ``renormalize`` the elements are divided by the subspace
    population so that the result refers to the state conditioned on the
    subspace.
    """
    pop = diag_ijk + diag_lmn
    if renormalize:
        if pop <= 0:
            raise ValueError("subspace population is zero, cannot renormalize")
        diag_ijk, diag_lmn, offdiag = diag_ijk / pop, diag_lmn / pop, offdiag / pop
    return (diag_ijk + diag_lmn + 2.0 * offdiag) / 2.0


def ghz_witness_value(fidelity: float) -> float:
    """Expectation of the witness operator I/2 - |target><target|.

    Returns 1/2 - F; a negative value witnesses genuine multipartite
    entanglement.  Reports should quote the margin F - 1/2 alongside the
    decision, which depends only on the side of 1/2.
    """
    if not -1e-9 <= fidelity <= 1 + 1e-9:
        raise ValueError(f"fidelity {fidelity} outside [0, 1]")
    return 0.5 - fidelity


def gme_witnessed(fidelity: float) -> bool:
    """True when the subspace fidelity exceeds the GME bound of 1/2."""
    return fidelity > GME_BOUND


def certify_dimensionality(f_exp: float, std: float, bound: float = FMAX_BOUND) -> Certification:
    """Compare a measured fidelity against a class bound in sigma units."""
    if std <= 0:
        raise ValueError("std must be positive")
    margin = (f_exp - bound) / std
    return Certification(f_exp, std, bound, margin, f_exp > bound)


# ---------------------------------------------------------------------------
# Stochastic verification of the class bound (test oracle, not the
# production certification path).
# ---------------------------------------------------------------------------


def _truncate_to_rank(psi: PureState, party: int, cap: int) -> PureState:
    data = schmidt_decompose(psi, (party,))
    if int(np.sum(data.coefficients > 1e-12)) <= cap:
        return psi
    coeff = data.coefficients.copy()
    coeff[cap:] = 0.0
    coeff /= np.linalg.norm(coeff)
    mat = (data.left_vectors * coeff) @ data.right_vectors.T
    n = psi.num_parties
    rest = tuple(p for p in range(n) if p != party)
    perm = (party,) + rest
    shaped = mat.reshape(tuple(psi.dims[p] for p in perm))
    return PureState(psi.dims, np.transpose(shaped, np.argsort(perm)).reshape(-1))


def _overlap(target: PureState, phi: PureState) -> float:
    return float(abs(np.vdot(target.amplitudes, phi.amplitudes)) ** 2)


def _random_local_unitaries(dims, eps: float, rng: np.random.Generator):
    ops = []
    for d in dims:
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        herm = (g + g.conj().T) / 2
        w, v = np.linalg.eigh(herm)
        ops.append((v * np.exp(1j * eps * w)) @ v.conj().T)
    return ops


def _apply_locals(psi: PureState, ops) -> PureState:
    tensor = psi.amplitudes.reshape(psi.dims)
    n = psi.num_parties
    for p, u in enumerate(ops):
        tensor = np.moveaxis(np.tensordot(u, tensor, axes=([1], [p])), 0, p)
    vec = tensor.reshape(-1)
    return PureState(psi.dims, vec / np.linalg.norm(vec))


def _subspace_refine(target: PureState, phi: PureState, party: int, cap: int) -> float:
    """Best overlap of a class state supported on phi's current local span.

    For a fixed ``cap``-dimensional subspace S on ``party`` the optimal
    state is the normalized projection of the target, with overlap
    ||(P_S x I)|target>||^2.
    """
    basis = schmidt_decompose(phi, (party,)).left_vectors[:, :cap]
    n = target.num_parties
    rest = tuple(p for p in range(n) if p != party)
    tmat = np.transpose(target.amplitudes.reshape(target.dims), (party,) + rest)
    tmat = tmat.reshape(target.dims[party], -1)
    return float(np.linalg.norm(basis.conj().T @ tmat) ** 2)


def _restart_best(target: PureState, member, rng: np.random.Generator,
                  perturb_iters: int, refine: bool) -> float:
    constrained = [(p, cap) for p, cap in enumerate(member) if cap < target.dims[p]]
    phi = haar_random_state(target.dims, rng)
    for p, cap in constrained:
        phi = _truncate_to_rank(phi, p, cap)
    best = _overlap(target, phi)
    eps = 0.4
    for _ in range(perturb_iters):
        cand = _apply_locals(phi, _random_local_unitaries(target.dims, eps, rng))
        for p, cap in constrained:
            cand = _truncate_to_rank(cand, p, cap)
        val = _overlap(target, cand)
        if val > best:
            best, phi = val, cand
        else:
            eps *= 0.8
    if refine:
        for p, cap in constrained:
            best = max(best, _subspace_refine(target, phi, p, cap))
    return best


def search_class_overlap(target: PureState, cls: RankVectorClass, restarts: int,
                         seed: int, perturb_iters: int = 10,
                         refine: bool = True) -> np.ndarray:
    """Hill-climbing search for the best class overlap with ``target``.

    Each restart draws a Haar-random state, truncates it into the class
    (truncated-Schmidt ansatz), climbs with small random local unitaries,
    and optionally finishes with the closed-form best state on the reached
    local subspace.  Restarts are seeded independently by index, so the
    search is deterministic and parallelizable.  Returns the per-restart
    best overlaps; none may exceed the analytic class bound.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    members = cls.members(target.dims)
    out = np.empty(restarts)
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        out[r] = _restart_best(target, members[r % len(members)], rng, perturb_iters, refine)
    return out
