"""Two-qubit density-matrix model of the heralded atom-atom state.

Covers the noisy Bell-state family produced by single-photon heralding,
Born-rule measurement statistics in arbitrary Bloch bases, fidelity
bookkeeping, and the photon-recoil physics that caps the single-photon
interference visibility.

Basis order throughout is (uu, ud, du, dd) for the two spin qubits.
The heralded family is anti-correlated in Z; measured correlators in the
experiment's convention are made positive by a local bit flip on the
second qubit (the ``flip_b`` switch), implemented as conjugation of that
qubit's measurement axis by sigma_x.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BlochVector",
    "TwoQubitState",
    "NoiseParams",
    "LambDickeParams",
    "Z_AXIS",
    "X_AXIS",
    "Y_AXIS",
    "diag_axis",
    "build_heralded_state",
    "correlator",
    "outcome_distribution",
    "chsh_value",
    "qber",
    "fidelity_from_visibilities",
    "bell_fidelity",
    "debye_waller",
    "spi_visibility",
    "interference_fringe",
]

_I2 = np.eye(2, dtype=complex)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class BlochVector:
    """Unit vector on the Bloch sphere defining a +-1 valued measurement."""

    nx: float
    ny: float
    nz: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.nx**2 + self.ny**2 + self.nz**2)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"Bloch vector must be unit norm, got |n| = {norm}")

    def operator(self) -> np.ndarray:
        return self.nx * _SX + self.ny * _SY + self.nz * _SZ

    def bit_flipped(self) -> "BlochVector":
        """Axis after conjugating the measurement by sigma_x (Z-basis bit flip)."""
        return BlochVector(self.nx, -self.ny, -self.nz)


Z_AXIS = BlochVector(0.0, 0.0, 1.0)
X_AXIS = BlochVector(1.0, 0.0, 0.0)
Y_AXIS = BlochVector(0.0, 1.0, 0.0)


def diag_axis(sign: int = +1) -> BlochVector:
    """(Z + sign*X)/sqrt(2), the near-optimal CHSH test axes."""
    r = 1.0 / math.sqrt(2.0)
    return BlochVector(sign * r, 0.0, r)


class TwoQubitState:
    """A 4x4 density matrix with validated Hermiticity, trace and positivity.

    Eigenvalues down to -1e-10 are tolerated as rounding debris; anything
    below that is a modelling bug and raises instead of being silently
    renormalized.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("density matrix is not Hermitian within 1e-12")
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace is {tr}, not 1 within 1e-12")
        eigs = np.linalg.eigvalsh(m)
        if eigs.min() < -1e-10:
            raise ValueError(f"density matrix has eigenvalue {eigs.min()} < -1e-10")
        self.matrix = m

    def expectation(self, op: np.ndarray) -> float:
        return float(np.trace(self.matrix @ op).real)

    def __repr__(self) -> str:
        return f"TwoQubitState(trace={np.trace(self.matrix).real:.6f})"


@dataclass(frozen=True)
class NoiseParams:
    """Per-distance noise knobs of the heralded-state model.

    alpha_exc is the double-excitation admixture of the heralded state;
    dephase_lambda scales down the ud/du coherence; white_noise mixes in
    the maximally mixed state; readout_flip acts on measurement outcomes,
    not on the state.  sign and delta_phi select which Bell state the
    herald produced and its interferometer phase.
    """

    alpha_exc: float = 0.0
    dephase_lambda: float = 0.0
    white_noise: float = 0.0
    readout_flip: float = 0.0
    delta_phi: float = 0.0
    sign: int = +1

    def __post_init__(self) -> None:
        for name in ("alpha_exc", "dephase_lambda", "white_noise", "readout_flip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.sign not in (+1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_visibilities(
        cls,
        v_zz: float,
        v_xx: float,
        white_noise: float = 0.0,
        readout_flip: float = 0.0,
        sign: int = +1,
    ) -> "NoiseParams":
        """Calibrate (alpha_exc, dephase_lambda) to hit measured visibilities.

        Inverts v_zz = (1 - 2a)(1 - w) and v_xx = (1 - a)(1 - l)(1 - w)
        for the sign=+1, delta_phi=0 convention with white-noise level w.
        """
        if not 0.0 <= white_noise < 1.0:
            raise ValueError("white_noise must lie in [0, 1)")
        vz = v_zz / (1.0 - white_noise)
        vx = v_xx / (1.0 - white_noise)
        alpha = (1.0 - vz) / 2.0
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"v_zz={v_zz} not reachable (alpha={alpha})")
        lam = 1.0 - vx / (1.0 - alpha)
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"v_xx={v_xx} not reachable (lambda={lam})")
        return cls(
            alpha_exc=alpha,
            dephase_lambda=lam,
            white_noise=white_noise,
            readout_flip=readout_flip,
            sign=sign,
        )


@dataclass(frozen=True)
class LambDickeParams:
    """Recoil parameters: Lamb-Dicke factors, trap frequencies, release time."""

    eta: tuple[float, float, float]
    omega: tuple[float, float, float] = (0.0, 0.0, 0.0)
    t: float = 0.0

    def __post_init__(self) -> None:
        if any(e < 0 for e in self.eta) or any(w < 0 for w in self.omega) or self.t < 0:
            raise ValueError("eta, omega and t must be nonnegative")


def build_heralded_state(params: NoiseParams) -> TwoQubitState:
    """Heralded two-qubit state: Bell admixture plus dephasing and white noise.

    Construction order: the ideal mixture of |uu> (weight alpha_exc) with
    the phase-tagged Bell state, then coherence damping by
    (1 - dephase_lambda) on the ud/du element, then white-noise mixing.
    readout_flip is deliberately not applied here; it acts on outcomes.
    """
    a = params.alpha_exc
    phase = cmath.exp(1j * params.delta_phi)
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1.0 / math.sqrt(2.0)
    psi[2] = params.sign * phase / math.sqrt(2.0)
    rho = a * np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    rho += (1.0 - a) * np.outer(psi, psi.conj())
    lam = params.dephase_lambda
    rho[1, 2] *= 1.0 - lam
    rho[2, 1] *= 1.0 - lam
    p = params.white_noise
    rho = (1.0 - p) * rho + p * np.eye(4, dtype=complex) / 4.0
    return TwoQubitState(rho)


def _pair_operator(a: BlochVector, b: BlochVector, flip_b: bool) -> np.ndarray:
    bb = b.bit_flipped() if flip_b else b
    return np.kron(a.operator(), bb.operator())


def correlator(rho: TwoQubitState, a: BlochVector, b: BlochVector, flip_b: bool = False) -> float:
    """Tr[rho (a.sigma x b.sigma)], optionally with the second qubit bit-flipped."""
    return rho.expectation(_pair_operator(a, b, flip_b))


def outcome_distribution(
    rho: TwoQubitState,
    a: BlochVector,
    b: BlochVector,
    readout_flip: float = 0.0,
) -> np.ndarray:
    """Joint outcome probabilities P[i, j] for outcomes i, j in {0, 1}.

    Outcome 0 is the +1 eigenvalue of the axis operator.  Each party's
    outcome is then flipped independently with probability readout_flip.
    """
    if not 0.0 <= readout_flip <= 1.0:
        raise ValueError(f"readout_flip={readout_flip} outside [0, 1]")
    pa = [(_I2 + s * a.operator()) / 2.0 for s in (+1.0, -1.0)]
    pb = [(_I2 + s * b.operator()) / 2.0 for s in (+1.0, -1.0)]
    probs = np.empty((2, 2), dtype=float)
    for i in range(2):
        for j in range(2):
            probs[i, j] = rho.expectation(np.kron(pa[i], pb[j]))
    probs = np.clip(probs, 0.0, 1.0)
    probs /= probs.sum()
    r = readout_flip
    if r > 0.0:
        flip = np.array([[1.0 - r, r], [r, 1.0 - r]])
        probs = flip @ probs @ flip.T
    return probs


def chsh_value(
    rho: TwoQubitState,
    a_axes: tuple[BlochVector, BlochVector],
    b_axes: tuple[BlochVector, BlochVector],
    flip_b: bool = False,
) -> float:
    """S = E(0,0) + E(0,1) + E(1,0) - E(1,1) for the given setting pairs."""
    e = [[correlator(rho, a, b, flip_b) for b in b_axes] for a in a_axes]
    return e[0][0] + e[0][1] + e[1][0] - e[1][1]


def qber(
    rho: TwoQubitState,
    key_a: BlochVector,
    key_b: BlochVector,
    flip_b: bool = False,
    readout_flip: float = 0.0,
) -> float:
    """Probability the two parties disagree in their key bases."""
    b = key_b.bit_flipped() if flip_b else key_b
    probs = outcome_distribution(rho, key_a, b, readout_flip)
    return float(probs[0, 1] + probs[1, 0])


def fidelity_from_visibilities(v_zz: float, v_xx: float) -> float:
    """Bell-state fidelity estimate (1 + V_ZZ + 2 V_XX) / 4 from two visibilities."""
    if not -1.0 <= v_zz <= 1.0 or not -1.0 <= v_xx <= 1.0:
        raise ValueError("visibilities must lie in [-1, 1]")
    return 0.25 * (1.0 + v_zz + 2.0 * v_xx)


def bell_fidelity(rho: TwoQubitState, sign: int = +1, delta_phi: float = 0.0) -> float:
    """Overlap of rho with the phase-tagged Bell state (ud + sign e^{i phi} du)/sqrt2."""
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1.0 / math.sqrt(2.0)
    psi[2] = sign * cmath.exp(1j * delta_phi) / math.sqrt(2.0)
    return float(np.real(psi.conj() @ rho.matrix @ psi))


def debye_waller(p: LambDickeParams) -> float:
    """Probability the motional state survives recoil: prod exp(-eta^2 (1 + w^2 t^2))."""
    out = 1.0
    for eta, omega in zip(p.eta, p.omega):
        out *= math.exp(-(eta**2) * (1.0 + (omega * p.t) ** 2))
    return out


def spi_visibility(dw: float, p: float) -> float:
    """Maximal single-photon interference visibility D (1 - p)."""
    if not 0.0 < dw <= 1.0:
        raise ValueError(f"Debye-Waller factor must lie in (0, 1], got {dw}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"excitation probability must lie in [0, 1], got {p}")
    return dw * (1.0 - p)


def interference_fringe(p: float, dw: float, phi: float) -> tuple[float, float]:
    """Single-click intensities at the two interferometer outputs.

    I_pm = p (1 pm D (1 - p) cos phi) / 2, so the two outputs always sum
    to the emission probability p and a visibility fit over phi recovers
    spi_visibility(D, p).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"excitation probability must lie in [0, 1], got {p}")
    if not 0.0 < dw <= 1.0:
        raise ValueError(f"Debye-Waller factor must lie in (0, 1], got {dw}")
    v = spi_visibility(dw, p)
    c = math.cos(phi)
    return 0.5 * p * (1.0 + v * c), 0.5 * p * (1.0 - v * c)
