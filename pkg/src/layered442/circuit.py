"""Simulation of the layered-state photonic circuit.

Two polarization Bell pairs are fused on a polarizing beam splitter (PBS)
into a three-photon GHZ state, heralded by a trigger photon.  Two of the
photons then pass a beam-displacer interferometer that doubles their local
dimension: a BD maps polarization into path, half-wave plates at 22.5 deg
mix the polarizations in each path, and a PBS coincidence post-selects the
terms with equal polarizations.

The hybrid polarization-path levels are encoded as logical digits

    0 = (H, upper)   1 = (H, lower)   2 = (V, upper)   3 = (V, lower)

and a bare polarization qubit uses H = 0, V = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import DensityOperator, PureState, fidelity_pure

__all__ = [
    "ModeLabel",
    "OpticalElement",
    "CircuitOutcome",
    "PostSelectionError",
    "hwp_matrix",
    "qwp_matrix",
    "apply_element",
    "bell_pair",
    "ghz_fuse",
    "pbs_coincidence",
    "dimension_double",
    "doubler_layout",
    "make_psi442",
    "circuit_psi442",
    "circuit_matches_closed_form",
    "apply_white_noise",
    "visibility_for_fidelity",
    "noisy_psi442",
    "psi442_fidelity",
    "SIGNAL_KETS",
]

SIGNAL_KETS = ("000", "111", "220", "331")

H, V = "H", "V"
UPPER, LOWER = "u", "l"

# Digit d: polarization V iff d >= 2, lower path iff d is odd.
_DIGIT_POL = (H, H, V, V)
_DIGIT_PATH = (UPPER, LOWER, UPPER, LOWER)


class PostSelectionError(ValueError):
    """No amplitude survives a post-selection step."""


@dataclass(frozen=True)
class ModeLabel:
    """Hybrid polarization-path label of a four-level photonic mode."""

    polarization: str
    path: str

    def __post_init__(self):
        if self.polarization not in (H, V):
            raise ValueError(f"polarization must be 'H' or 'V', got {self.polarization!r}")
        if self.path not in (UPPER, LOWER):
            raise ValueError(f"path must be 'u' or 'l', got {self.path!r}")

    @property
    def digit(self) -> int:
        return 2 * (self.polarization == V) + (self.path == LOWER)

    @classmethod
    def from_digit(cls, digit: int) -> "ModeLabel":
        if not 0 <= digit <= 3:
            raise ValueError(f"digit must be in 0..3, got {digit}")
        return cls(_DIGIT_POL[digit], _DIGIT_PATH[digit])

    def __str__(self):
        return f"{self.polarization}_{self.path}"


@dataclass(frozen=True)
class OpticalElement:
    """One element of the simulated optical layout.

    kind is one of HWP, QWP (with ``angle`` in radians), BD or PBS; the
    element acts on the photon at index ``party``.
    """

    kind: str
    party: int
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in ("HWP", "QWP", "BD", "PBS"):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.kind in ("HWP", "QWP"):
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} requires a finite angle")


@dataclass(frozen=True)
class CircuitOutcome:
    """Post-selected output state and its success probability."""

    state: PureState
    success_probability: float

    def __post_init__(self):
        p = float(self.success_probability)
        if not -1e-12 <= p <= 1 + 1e-12:
            raise ValueError(f"success probability {p} outside [0, 1]")
        object.__setattr__(self, "success_probability", min(1.0, max(0.0, p)))


def hwp_matrix(theta: float) -> np.ndarray:
    """Jones matrix of a half-wave plate with fast axis at ``theta``."""
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=np.complex128)


def qwp_matrix(theta: float) -> np.ndarray:
    """Jones matrix of a quarter-wave plate (diag(1, i) in the plate frame)."""
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([1.0, 1.0j]) @ rot.T


def _apply_local(psi: PureState, party: int, op: np.ndarray) -> PureState:
    """Apply a (possibly rectangular, norm-preserving) operator to one party."""
    if not 0 <= party < psi.num_parties:
        raise ValueError(f"party {party} out of range")
    d_in = psi.dims[party]
    if op.shape[1] != d_in:
        raise ValueError(f"operator expects dimension {op.shape[1]}, party has {d_in}")
    pre = math.prod(psi.dims[:party]) if party else 1
    post = math.prod(psi.dims[party + 1:]) if party + 1 < psi.num_parties else 1
    block = psi.amplitudes.reshape(pre, d_in, post)
    out = np.einsum("ij,ajb->aib", op, block)
    dims = psi.dims[:party] + (op.shape[0],) + psi.dims[party + 1:]
    return PureState(dims, out.reshape(-1))


# Beam displacer: polarization decides the output path.
_BD_ISOMETRY = np.zeros((4, 2), dtype=np.complex128)
_BD_ISOMETRY[0, 0] = 1.0  # H -> (H, upper) = digit 0
_BD_ISOMETRY[3, 1] = 1.0  # V -> (V, lower) = digit 3


def _hwp4(theta: float) -> np.ndarray:
    """HWP acting on both paths of a four-level hybrid mode."""
    j = hwp_matrix(theta)
    m = np.zeros((4, 4), dtype=np.complex128)
    for path_digits in ((0, 2), (1, 3)):  # (H, V) within upper / lower path
        for a, da in enumerate(path_digits):
            for b, db in enumerate(path_digits):
                m[da, db] = j[a, b]
    return m


def apply_element(psi: PureState, element: OpticalElement) -> PureState:
    """Apply a unitary optical element; PBS post-selection is separate."""
    d = psi.dims[element.party]
    if element.kind == "BD":
        if d != 2:
            raise ValueError("BD acts on a bare polarization qubit")
        return _apply_local(psi, element.party, _BD_ISOMETRY)
    if element.kind in ("HWP", "QWP"):
        jones = hwp_matrix(element.angle) if element.kind == "HWP" else qwp_matrix(element.angle)
        if d == 2:
            return _apply_local(psi, element.party, jones)
        if d == 4:
            if element.kind == "QWP":
                raise ValueError("QWP on hybrid four-level modes is not part of the layout")
            return _apply_local(psi, element.party, _hwp4(element.angle))
        raise ValueError(f"waveplate on party of dimension {d}")
    raise ValueError("PBS is post-selective; use pbs_coincidence or ghz_fuse")


def bell_pair() -> PureState:
    """Polarization Bell pair (|HH> + |VV>)/sqrt(2)."""
    amps = np.zeros(4, dtype=np.complex128)
    amps[0] = amps[3] = 1 / math.sqrt(2)
    return PureState((2, 2), amps)


def _pol_of_digit(digit: int, dim: int) -> str:
    if dim == 2:
        return (H, V)[digit]
    return _DIGIT_POL[digit]


def _keep_equal_polarization(psi: PureState, parties: tuple[int, int]):
    """Zero out components where the two parties' polarizations differ."""
    shape = psi.dims
    amps = psi.amplitudes.reshape(shape).copy()
    i, j = parties
    pol_i = np.array([_pol_of_digit(d, shape[i]) for d in range(shape[i])])
    pol_j = np.array([_pol_of_digit(d, shape[j]) for d in range(shape[j])])
    mask = pol_i[:, None] == pol_j[None, :]
    expand = [None] * len(shape)
    expand[i] = slice(None)
    expand[j] = slice(None)
    amps *= mask[tuple(expand)]
    kept = amps.reshape(-1)
    prob = float(np.linalg.norm(kept) ** 2)
    return kept, prob


def pbs_coincidence(psi: PureState, parties: tuple[int, int] = (0, 1)) -> CircuitOutcome:
    """PBS coincidence post-selection: one photon per output port.

    Both photons transmit (H, H) or both reflect (V, V); cross-polarized
    terms bunch into one port and are discarded.  The recorded probability
    is the squared norm of the kept component.
    """
    kept, prob = _keep_equal_polarization(psi, parties)
    if prob <= 1e-15:
        raise PostSelectionError("no amplitude survives PBS coincidence")
    return CircuitOutcome(PureState(psi.dims, kept / math.sqrt(prob)), prob)


def ghz_fuse(pair1: PureState, pair2: PureState) -> CircuitOutcome:
    """Fuse two photon pairs on a PBS into a heralded three-photon state.

    Photons are ordered (1, 2) + (3, 4); the PBS interferes photons 2 and 3
    and coincidence keeps the equal-polarization terms.  Photon 3 is the
    trigger: it is projected onto the diagonal basis, with the minus
    outcome treated as phase-corrected by feed-forward, so the herald
    itself costs no probability.  With ideal Bell inputs the output is
    (|HHH> + |VVV>)/sqrt(2) on photons (1, 2, 4) and the success
    probability (the PBS coincidence weight) is 1/2.
    """
    if pair1.dims != (2, 2) or pair2.dims != (2, 2):
        raise ValueError("ghz_fuse expects two two-photon polarization states")
    joint = PureState(pair1.dims + pair2.dims, np.kron(pair1.amplitudes, pair2.amplitudes))
    kept, prob = _keep_equal_polarization(joint, (1, 2))
    if prob <= 1e-15:
        raise PostSelectionError("no amplitude survives PBS coincidence")
    # Project the trigger (axis 2) onto |+>; no cancellation is possible
    # because photon 2 carries the same polarization in every kept term.
    tensor = kept.reshape(2, 2, 2, 2)
    heralded = (tensor[:, :, 0, :] + tensor[:, :, 1, :]) / math.sqrt(2)
    amps = heralded.reshape(-1)
    amps /= np.linalg.norm(amps)
    return CircuitOutcome(PureState((2, 2, 2), amps), prob)


def doubler_layout(parties: tuple[int, int] = (0, 1)) -> tuple[OpticalElement, ...]:
    """Element sequence of the dimension-increasing interferometer."""
    p0, p1 = parties
    theta = math.pi / 8
    return (
        OpticalElement("BD", p0),
        OpticalElement("BD", p1),
        OpticalElement("HWP", p0, theta),
        OpticalElement("HWP", p1, theta),
        OpticalElement("PBS", p0),
    )


def dimension_double(psi: PureState, parties: tuple[int, int] = (0, 1)) -> CircuitOutcome:
    """Double the local dimension of two polarization qubits.

    BDs convert polarization into path, HWPs at 22.5 deg mix the
    polarizations within each path, and a PBS coincidence keeps the
    equal-polarization terms, turning a Bell input into the four-level
    maximally entangled state (|00> + |11> + |22> + |33>)/2 with
    probability 1/2.  Spectator parties pass through untouched.
    """
    p0, p1 = parties
    if p0 == p1:
        raise ValueError("parties must be distinct")
    for p in (p0, p1):
        if not 0 <= p < psi.num_parties or psi.dims[p] != 2:
            raise ValueError(f"party {p} must be a polarization qubit")
    state = psi
    layout = doubler_layout(parties)
    for element in layout[:-1]:
        state = apply_element(state, element)
    return pbs_coincidence(state, parties)


def make_psi442() -> PureState:
    """Closed-form layered state (|000> + |111> + |220> + |331>)/2, dims (4, 4, 2)."""
    amps = np.zeros(32, dtype=np.complex128)
    for ket in SIGNAL_KETS:
        i, j, k = (int(c) for c in ket)
        amps[(i * 4 + j) * 2 + k] = 0.5
    return PureState((4, 4, 2), amps)


def circuit_psi442() -> tuple[CircuitOutcome, CircuitOutcome]:
    """Run the full chain: Bell pairs -> PBS fusion -> dimension doubling.

    Returns the GHZ-fusion outcome and the final layered-state outcome.
    The final state must match :func:`make_psi442` exactly.
    """
    fused = ghz_fuse(bell_pair(), bell_pair())
    layered = dimension_double(fused.state, parties=(0, 1))
    return fused, layered


def apply_white_noise(psi: PureState, visibility: float) -> DensityOperator:
    """Mix a pure state with white noise: v |psi><psi| + (1 - v) I/D."""
    v = float(visibility)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    d = psi.dim
    mat = v * np.outer(psi.amplitudes, psi.amplitudes.conj()) + (1 - v) * np.eye(d) / d
    return DensityOperator(psi.dims, mat)


def visibility_for_fidelity(target_fidelity: float, dim: int = 32) -> float:
    """Invert F = v + (1 - v)/D for the white-noise visibility."""
    if not 0.0 <= target_fidelity <= 1.0:
        raise ValueError("fidelity must lie in [0, 1]")
    return (target_fidelity - 1.0 / dim) / (1.0 - 1.0 / dim)


def circuit_matches_closed_form(atol: float = 1e-12) -> bool:
    """Check that the composed circuit reproduces the closed-form state."""
    _, layered = circuit_psi442()
    return bool(np.max(np.abs(layered.state.amplitudes - make_psi442().amplitudes)) < atol)


def noisy_psi442(visibility: float) -> DensityOperator:
    """White-noise layered state, the standard simulation input."""
    return apply_white_noise(make_psi442(), visibility)


def psi442_fidelity(rho: DensityOperator) -> float:
    """Fidelity of a state with the ideal layered target."""
    return fidelity_pure(rho, make_psi442())
