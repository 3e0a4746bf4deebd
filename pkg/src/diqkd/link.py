"""Photonic link budget, heralding success probabilities, and phase bookkeeping.

The arm efficiency multiplies the component chain with the fiber
transmission over half the total length (each node sits L/2 from the
midpoint station).  A measured per-length arm transmission, when
supplied, overrides the analytic fiber term: measurement beats model.

The trial latency is 3L/2c in vacuum-light time: photon flight to the
midpoint plus the classical herald back to the nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "SPEED_OF_LIGHT",
    "LinkBudget",
    "TimingModel",
    "PhasePaths",
    "arm_efficiency",
    "success_probability_spi",
    "success_probability_tpi",
    "event_rate",
    "phase_difference",
]

SPEED_OF_LIGHT = 299_792_458.0  # vacuum, m/s


@dataclass(frozen=True)
class LinkBudget:
    """Component efficiencies plus fiber attenuation for one arm of the link."""

    collection: float = 0.085
    fiber_coupling: float = 0.50
    qfc: float = 0.47
    insertion: float = 0.86
    bsm: float = 0.765
    detector: float = 0.85
    atten_db_per_km: float = 0.32
    length_km: float = 0.0
    measured_arm_transmission: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("collection", "fiber_coupling", "qfc", "insertion", "bsm", "detector"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.atten_db_per_km < 0:
            raise ValueError("attenuation must be nonnegative")
        if self.length_km < 0:
            raise ValueError("length must be nonnegative")
        if self.measured_arm_transmission is not None and not 0.0 <= self.measured_arm_transmission <= 1.0:
            raise ValueError("measured_arm_transmission outside [0, 1]")


@dataclass(frozen=True)
class TimingModel:
    """Per-trial timing: fixed overhead, duty cycle, and signalling speed."""

    overhead_s: float = 12e-6
    duty_cycle: float = 0.15
    c_mps: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if self.overhead_s <= 0:
            raise ValueError("overhead must be positive")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError("duty cycle must lie in (0, 1]")


@dataclass(frozen=True)
class PhasePaths:
    """Per-node optical path lengths (m) and the shared wave numbers (rad/m)."""

    l_780: float
    l_signal: float
    l_wg: float
    l_tel: float
    l_pump: float
    k_pho: float
    k_tel: float
    k_pump: float

    def __post_init__(self) -> None:
        for name in ("l_780", "l_signal", "l_wg", "l_tel", "l_pump"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("k_pho", "k_tel", "k_pump"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def arm_efficiency(budget: LinkBudget) -> float:
    """Total one-arm efficiency: component product times fiber transmission."""
    comp = (
        budget.collection
        * budget.fiber_coupling
        * budget.qfc
        * budget.insertion
        * budget.bsm
        * budget.detector
    )
    if budget.measured_arm_transmission is not None:
        fiber = budget.measured_arm_transmission
    else:
        fiber = 10.0 ** (-budget.atten_db_per_km * (budget.length_km / 2.0) / 10.0)
    return comp * fiber


def success_probability_spi(
    alpha_a: float, eta_a: float, alpha_b: float, eta_b: float
) -> float:
    """Single-photon heralding success probability alpha_A eta_A + alpha_B eta_B."""
    for name, v in (("alpha_a", alpha_a), ("eta_a", eta_a), ("alpha_b", alpha_b), ("eta_b", eta_b)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    p = alpha_a * eta_a + alpha_b * eta_b
    if p > 1.0:
        raise ValueError(f"success probability {p} exceeds 1; inputs are inconsistent")
    return p


def success_probability_tpi(eta_a: float, eta_b: float) -> float:
    """Two-photon heralding success probability 0.5 eta_A eta_B."""
    if not 0.0 <= eta_a <= 1.0 or not 0.0 <= eta_b <= 1.0:
        raise ValueError("efficiencies must lie in [0, 1]")
    return 0.5 * eta_a * eta_b


def event_rate(p_s: float, timing: TimingModel, length_km: float) -> float:
    """Heralded events per second: p_s times the latency-limited repetition rate."""
    if p_s < 0:
        raise ValueError("success probability must be nonnegative")
    latency = 1.5 * (length_km * 1000.0) / timing.c_mps
    return p_s * timing.duty_cycle / (timing.overhead_s + latency)


def _wrap_phase(x: float) -> float:
    """Reduce to (-pi, pi]."""
    r = math.remainder(x, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


def phase_difference(paths_a: PhasePaths, paths_b: PhasePaths) -> float:
    """Interferometer phase difference between the two arms, in (-pi, pi].

    Three terms survive the common-mode cancellations: the 780-band paths
    seen by the photon, the telecom-band paths after conversion, and the
    conversion pump path.  The wave numbers are shared lasers and must
    agree between the two nodes.
    """
    for name in ("k_pho", "k_tel", "k_pump"):
        ka, kb = getattr(paths_a, name), getattr(paths_b, name)
        if abs(ka - kb) > 1e-9 * max(ka, kb):
            raise ValueError(f"{name} differs between nodes ({ka} vs {kb}); lasers are shared")
    d780 = paths_a.l_780 - paths_b.l_780
    dsig = paths_a.l_signal - paths_b.l_signal
    dwg = paths_a.l_wg - paths_b.l_wg
    dtel = paths_a.l_tel - paths_b.l_tel
    dpump = paths_a.l_pump - paths_b.l_pump
    phi = (
        paths_a.k_pho * (d780 + dsig)
        + paths_a.k_tel * (dwg + dtel)
        + paths_a.k_pump * dpump
    )
    return _wrap_phase(phi)
