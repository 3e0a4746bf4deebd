"""Finite-size key length by entropy accumulation, plus the asymptotic rates.

The per-round entropy certificate is the one-parameter family built from
the CHSH bound

    g(w) = 1 - h(1/2 + 1/2 sqrt(16 w (w - 1) + 3)),   w in (3/4, (2+sqrt2)/4),

extended affinely above a cut point w_t (the cut caps the gradient that
enters the second-order accumulation penalty).  All logarithms are base
2 and all entropies are in bits.

Policy choices that the published operating point pins down, both of
which can be relaxed by argument:

* the soundness budget is split additively across the error-correction,
  privacy-amplification, smoothing, and accumulation-conditioning terms
  (``eps_ec + eps_pa + eps_s + eps_ea <= eps_snd``), the conservative
  decomposition of the lineage this analysis follows;
* the cut-point search in the key-length evaluation is restricted to
  w_t >= w_in, i.e. the certificate is used in its exact branch rather
  than the affine-extension branch (``pt_full_range=True`` lifts this
  and yields a strictly larger, still sound, key length).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .mathcore import binary_entropy, chsh_to_winprob, rel_entropy_binary

__all__ = [
    "TSIRELSON_WIN",
    "LEAK_EV_BITS",
    "EatBudget",
    "HonestModel",
    "gamma_eff",
    "g_func",
    "g_slope",
    "f_func",
    "eta_func",
    "eta_opt",
    "eta_inf",
    "optimal_eps_tilde",
    "leak_ec",
    "completeness_ea",
    "delta_for_completeness",
    "vartheta",
    "EatResult",
    "key_length_eat",
    "asymptotic_rate_sifted",
    "asymptotic_rate_nosift",
]

TSIRELSON_WIN = (2.0 + math.sqrt(2.0)) / 4.0
LEAK_EV_BITS = 64.0  # verification tag length; fixed with eps_ec = 2^-61
_PT_EPS = 1e-9  # grid inset from the singular interval endpoints


@dataclass(frozen=True)
class EatBudget:
    """Failure-probability decomposition of the accumulation analysis.

    Unset split parameters (None) are optimized internally by
    key_length_eat; explicitly set ones are used as given.
    """

    eps_snd: float = 1e-5
    eps_ec: float = 2.0**-61
    eps_pa: Optional[float] = None
    eps_s: Optional[float] = None
    eps_s_prime: Optional[float] = None
    eps_s_dprime: Optional[float] = None
    eps_ea: Optional[float] = None
    eps_ec_com: float = 0.005
    eps_tilde: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_snd < 1.0:
            raise ValueError(f"eps_snd={self.eps_snd} outside (0, 1)")
        if not 0.0 < self.eps_ec < self.eps_snd:
            raise ValueError("eps_ec must lie in (0, eps_snd)")
        if not 0.0 < self.eps_ec_com < 1.0:
            raise ValueError("eps_ec_com must lie in (0, 1)")
        if self.eps_tilde is not None and not 0.0 <= self.eps_tilde < self.eps_ec_com:
            raise ValueError("eps_tilde must lie in [0, eps_ec_com)")
        if self.is_fully_split():
            self.validate_split()

    def is_fully_split(self) -> bool:
        return None not in (self.eps_pa, self.eps_s, self.eps_s_prime, self.eps_s_dprime, self.eps_ea)

    def validate_split(self) -> None:
        if self.eps_s - self.eps_s_prime - 2.0 * self.eps_s_dprime <= 0.0:
            raise ValueError("need eps_s - eps_s_prime - 2 eps_s_dprime > 0")
        if self.eps_ec + self.eps_pa + self.eps_s > self.eps_snd * (1.0 + 1e-12):
            raise ValueError("need eps_ec + eps_pa + eps_s <= eps_snd")
        for name in ("eps_pa", "eps_s", "eps_s_prime", "eps_s_dprime", "eps_ea"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} outside (0, 1)")


@dataclass(frozen=True)
class HonestModel:
    """Honest-device operating point: win probability, key error rate, test fractions."""

    omega: float
    q: float
    gamma_a: float
    gamma_b: float

    def __post_init__(self) -> None:
        if not 0.75 < self.omega <= TSIRELSON_WIN + 1e-15:
            raise ValueError(f"omega={self.omega} outside (3/4, (2+sqrt2)/4]")
        if not 0.0 <= self.q <= 0.5:
            raise ValueError(f"q={self.q} outside [0, 1/2]")
        for name in ("gamma_a", "gamma_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def from_chsh(cls, s: float, q: float, gamma_a: float, gamma_b: float) -> "HonestModel":
        return cls(chsh_to_winprob(s), q, gamma_a, gamma_b)


def gamma_eff(gamma_a: float, gamma_b: float) -> float:
    """Fraction of rounds whose outcomes sifting does not deterministically zero."""
    if not 0.0 <= gamma_a <= 1.0 or not 0.0 <= gamma_b <= 1.0:
        raise ValueError("test fractions must lie in [0, 1]")
    return 1.0 - gamma_a / 2.0 - gamma_b + 1.5 * gamma_a * gamma_b


def g_func(omega: float) -> float:
    """Certified single-round entropy at win probability omega, in bits.

    Continuously extended to g(3/4) = 0 and g((2+sqrt2)/4) = 1; outside
    the closed interval the certificate is undefined and this raises.
    """
    if not 0.75 <= omega <= TSIRELSON_WIN + 1e-15:
        raise ValueError(f"g is defined on [3/4, (2+sqrt2)/4], got {omega}")
    u = 16.0 * omega * (omega - 1.0) + 3.0
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return 1.0 - binary_entropy(0.5 + 0.5 * math.sqrt(u))


def g_slope(omega: float) -> float:
    """Closed-form derivative of g_func at an interior point."""
    if not 0.75 < omega < TSIRELSON_WIN:
        raise ValueError(f"g_slope needs an interior point, got {omega}")
    u = 16.0 * omega * (omega - 1.0) + 3.0
    z = 0.5 + 0.5 * math.sqrt(u)
    return math.log2(z / (1.0 - z)) * (8.0 * omega - 4.0) / math.sqrt(u)


def _g_vec(omega: np.ndarray) -> np.ndarray:
    u = 16.0 * omega * (omega - 1.0) + 3.0
    u = np.clip(u, 0.0, 1.0)
    z = 0.5 + 0.5 * np.sqrt(u)
    zc = 1.0 - z
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where((z > 0) & (z < 1), -z * np.log2(np.maximum(z, 1e-300)) - zc * np.log2(np.maximum(zc, 1e-300)), 0.0)
    return 1.0 - h


def _g_slope_vec(omega: np.ndarray) -> np.ndarray:
    u = 16.0 * omega * (omega - 1.0) + 3.0
    u = np.clip(u, 1e-300, None)
    z = 0.5 + 0.5 * np.sqrt(u)
    return np.log2(z / (1.0 - z)) * (8.0 * omega - 4.0) / np.sqrt(u)


def f_func(omega: float, omega_t: float) -> float:
    """The certificate with affine extension: g below omega_t, tangent above."""
    if omega <= omega_t:
        return g_func(omega)
    return g_func(omega_t) + g_slope(omega_t) * (omega - omega_t)


def eta_func(
    omega: float,
    omega_t: float,
    eps: float,
    eps_e: float,
    n: int,
    gamma_a: float,
    gamma_b: float,
) -> float:
    """Accumulated entropy per round after the second-order penalty.

    gamma_eff f(omega, omega_t) minus (2/sqrt n)(log2 9 + ceil(gamma_eff
    g'(omega_t))) sqrt(1 - 2 log2(eps eps_e)).
    """
    ge = gamma_eff(gamma_a, gamma_b)
    grad = math.ceil(ge * g_slope(omega_t))
    pen = (2.0 / math.sqrt(n)) * (math.log2(9.0) + grad) * math.sqrt(1.0 - 2.0 * math.log2(eps * eps_e))
    return ge * f_func(omega, omega_t) - pen


def _eta_opt_detail(
    omega_in: float,
    eps: float,
    eps_e: float,
    n: int,
    gamma_a: float,
    gamma_b: float,
    pt_min: Optional[float] = None,
) -> tuple[float, float]:
    """(max value clamped at 0, maximizing cut point)."""
    ge = gamma_eff(gamma_a, gamma_b)
    lo = 0.75 + _PT_EPS if pt_min is None else max(0.75 + _PT_EPS, pt_min)
    hi = TSIRELSON_WIN - _PT_EPS
    if lo >= hi:
        lo = hi - _PT_EPS
    scale = (2.0 / math.sqrt(n)) * math.sqrt(1.0 - 2.0 * math.log2(eps * eps_e))

    grid = np.linspace(lo, hi, 256)
    gv = _g_vec(grid)
    sv = _g_slope_vec(grid)
    f = np.where(omega_in <= grid, _g_vec(np.full_like(grid, omega_in)), gv + sv * (omega_in - grid))
    vals = ge * f - scale * (math.log2(9.0) + np.ceil(ge * sv))
    i = int(np.argmax(vals))

    def obj(wt: float) -> float:
        return eta_func(omega_in, wt, eps, eps_e, n, gamma_a, gamma_b)

    a = grid[max(0, i - 1)]
    b = grid[min(len(grid) - 1, i + 1)]
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(60):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = obj(d)
    candidates = [(float(vals[i]), float(grid[i])), (fc, c), (fd, d)]
    best_val, best_pt = max(candidates, key=lambda p: p[0])
    return max(best_val, 0.0), best_pt


def eta_opt(
    omega_in: float,
    eps: float,
    eps_e: float,
    n: int,
    gamma_a: float,
    gamma_b: float,
    pt_min: Optional[float] = None,
) -> float:
    """Certificate maximized over the cut point (256-point scan, golden refine).

    Deterministic; clamped at 0 when no cut point certifies anything.
    """
    return _eta_opt_detail(omega_in, eps, eps_e, n, gamma_a, gamma_b, pt_min)[0]


def _eta_inf_raw(q: float, omega: float, gamma_a: float, gamma_b: float) -> float:
    return (1.0 - gamma_a / 2.0) * (1.0 - gamma_b) * binary_entropy(q) + (
        gamma_a * gamma_b
    ) * binary_entropy(omega)


def eta_inf(model: HonestModel) -> float:
    """Asymptotic reconciliation rate: what an optimal code leaks per round."""
    return _eta_inf_raw(model.q, model.omega, model.gamma_a, model.gamma_b)


def optimal_eps_tilde(n: int, eps_ec_com: float) -> float:
    """1-D log-grid scan for the eps_tilde minimizing the leak overhead."""
    grid = eps_ec_com * np.logspace(-12.0, -0.05, 200)
    best, best_v = None, math.inf
    for et in grid:
        v = _leak_overhead(n, eps_ec_com, float(et))
        if v < best_v:
            best, best_v = float(et), v
    return best


def _leak_overhead(n: int, eps_ec_com: float, eps_tilde: float) -> float:
    return (
        2.0 * math.log2(5.0) * math.sqrt(n * math.log2(2.0 / (eps_ec_com - eps_tilde) ** 2))
        + 2.0 * math.log2(1.0 / eps_tilde)
        + 4.0
    )


def leak_ec(
    n: int,
    model: HonestModel,
    eps_ec_com: float,
    eps_tilde: Optional[float] = None,
) -> float:
    """Bits disclosed by one-way reconciliation: n eta_inf plus sublinear overhead."""
    if eps_tilde is None:
        eps_tilde = optimal_eps_tilde(n, eps_ec_com)
    if not 0.0 < eps_tilde < eps_ec_com:
        raise ValueError("need 0 < eps_tilde < eps_ec_com")
    return n * eta_inf(model) + _leak_overhead(n, eps_ec_com, eps_tilde)


def completeness_ea(n: int, c: float, gamma_a: float, gamma_b: float, omega_exp: float) -> float:
    """Honest abort probability bound 2^(-n D[c || gamma_a gamma_b omega_exp])."""
    mean = gamma_a * gamma_b * omega_exp
    if c > mean:
        raise ValueError(f"threshold c={c} must not exceed the honest mean {mean}")
    if c < 0.0:
        raise ValueError("threshold must be nonnegative")
    d = rel_entropy_binary(c, mean)
    return min(1.0, 2.0 ** (-n * d))


def delta_for_completeness(
    n: int,
    gamma_a: float,
    gamma_b: float,
    omega_exp: float,
    target: float = 1e-2,
) -> float:
    """Acceptance slack delta making the honest abort bound equal the target."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    mean = gamma_a * gamma_b * omega_exp
    lo, hi = 0.0, mean * (1.0 - 1e-15)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if completeness_ea(n, mean - mid, gamma_a, gamma_b, omega_exp) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def vartheta(eps: float) -> float:
    """Smoothing chain-rule cost, used at its bound 1 - 2 log2 eps."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"vartheta needs eps in (0, 1), got {eps}")
    return 1.0 - 2.0 * math.log2(eps)


@dataclass(frozen=True)
class EatResult:
    length: float  # zero-clamped
    raw_length: float
    rate: float
    budget: EatBudget
    delta: float
    leak_ec_bits: float
    eta_opt_bits: float
    pt_opt: float


def _ell_for_split(
    n: int,
    model: HonestModel,
    budget: EatBudget,
    omega_in: float,
    lec: float,
    pt_min: Optional[float],
) -> tuple[float, float, float]:
    """(raw length, eta_opt per round, optimizing cut point) for a full split."""
    if omega_in <= 0.75:
        return -math.inf, 0.0, 0.75 + _PT_EPS
    eps_e = budget.eps_ea + budget.eps_ec
    eo, pt = _eta_opt_detail(omega_in, budget.eps_s_prime, eps_e, n, model.gamma_a, model.gamma_b, pt_min)
    eps_rem = budget.eps_s - budget.eps_s_prime - 2.0 * budget.eps_s_dprime
    raw = (
        n * eo
        - lec
        - LEAK_EV_BITS
        - 2.0 * vartheta(eps_rem)
        - model.gamma_a * model.gamma_b * n
        - math.sqrt(n) * math.log2(5.0) * math.sqrt(1.0 - 2.0 * math.log2(budget.eps_s_dprime * eps_e))
        - 2.0 * math.log2(1.0 / budget.eps_pa)
    )
    return raw, eo, pt


def _split_from_fractions(budget: EatBudget, fr: dict[str, float]) -> Optional[EatBudget]:
    """Materialize a full budget from fractions (a, b, c, d); None if infeasible.

    a: eps_s share of the soundness room; d: eps_ea share of the rest;
    b: eps_s_prime inside eps_s; c: the 2 eps_s_dprime share of what is left.
    """
    room = budget.eps_snd - budget.eps_ec
    eps_s = fr["a"] * room
    eps_ea = fr["d"] * (room - eps_s)
    eps_pa = room - eps_s - eps_ea
    eps_sp = fr["b"] * eps_s
    eps_spp = fr["c"] * (eps_s - eps_sp) / 2.0
    if min(eps_s, eps_ea, eps_pa, eps_sp, eps_spp) <= 0.0:
        return None
    if eps_s - eps_sp - 2.0 * eps_spp <= 0.0:
        return None
    return replace(
        budget,
        eps_pa=eps_pa,
        eps_s=eps_s,
        eps_s_prime=eps_sp,
        eps_s_dprime=eps_spp,
        eps_ea=eps_ea,
    )


def key_length_eat(
    n: int,
    model: HonestModel,
    budget: EatBudget,
    delta: Optional[float] = None,
    pt_full_range: bool = False,
    delta_norm: str = "gamma_eff",
    grid_points: int = 16,
    passes: int = 2,
) -> EatResult:
    """Secret key length certified by entropy accumulation at block size n.

    Unset budget splits are optimized by deterministic coordinate descent
    on a log grid (grid_points per parameter, two refinement passes).
    delta defaults to the value putting the honest abort bound at 1e-2.
    delta_norm selects how the acceptance slack converts to a win-rate
    margin: divided by the surviving-round fraction ("gamma_eff", the
    certificate's own normalization) or by the test-round probability
    ("gamma_ab", matching the acceptance statistic's normalization).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if delta_norm not in ("gamma_eff", "gamma_ab"):
        raise ValueError("delta_norm must be 'gamma_eff' or 'gamma_ab'")
    if delta is None:
        delta = delta_for_completeness(n, model.gamma_a, model.gamma_b, model.omega)
    lec = leak_ec(n, model, budget.eps_ec_com, budget.eps_tilde)
    norm = gamma_eff(model.gamma_a, model.gamma_b)
    if delta_norm == "gamma_ab":
        norm = model.gamma_a * model.gamma_b
    omega_in = model.omega - delta / norm
    pt_min = None if pt_full_range else omega_in

    if budget.is_fully_split():
        budget.validate_split()
        raw, eo, pt = _ell_for_split(n, model, budget, omega_in, lec, pt_min)
        return EatResult(max(raw, 0.0), raw, raw / n, budget, delta, lec, eo, pt)

    fr = {"a": 0.5, "b": 0.5, "c": 0.5, "d": 0.5}
    spans = {k: (1e-6, 1.0 - 1e-6) for k in fr}

    def evaluate(trial: dict[str, float]) -> float:
        b = _split_from_fractions(budget, trial)
        if b is None:
            return -math.inf
        return _ell_for_split(n, model, b, omega_in, lec, pt_min)[0]

    best_val = evaluate(fr)
    for sweep in range(passes + 2):
        if sweep >= passes:
            # refinement pass: shrink each span one decade around the best point
            spans = {k: (max(1e-9, fr[k] / 10.0), min(1.0 - 1e-9, fr[k] * 10.0)) for k in fr}
        for key in ("a", "d", "b", "c"):
            lo, hi = spans[key]
            candidates = np.logspace(math.log10(lo), math.log10(hi), grid_points)
            for cand in candidates:
                trial = dict(fr)
                trial[key] = float(cand)
                v = evaluate(trial)
                if v > best_val:
                    best_val, fr = v, trial

    full = _split_from_fractions(budget, fr)
    raw, eo, pt = _ell_for_split(n, model, full, omega_in, lec, pt_min)
    return EatResult(max(raw, 0.0), raw, raw / n, full, delta, lec, eo, pt)


def asymptotic_rate_sifted(s: float, q: float, gamma_a: float, gamma_b: float) -> float:
    """Infinite-block key rate of the sifted protocol, in bits per event."""
    if s < 2.0 or s > 2.0 * math.sqrt(2.0) + 1e-12:
        raise ValueError(f"need a CHSH value in [2, 2 sqrt 2], got {s}")
    omega = chsh_to_winprob(s)
    return gamma_eff(gamma_a, gamma_b) * g_func(omega) - _eta_inf_raw(q, omega, gamma_a, gamma_b) - gamma_a * gamma_b


def asymptotic_rate_nosift(s: float, q: float) -> float:
    """Infinite-block rate of the sifting-free protocol in the rare-test limit."""
    if s < 2.0 or s > 2.0 * math.sqrt(2.0) + 1e-12:
        raise ValueError(f"need a CHSH value in [2, 2 sqrt 2], got {s}")
    return g_func(chsh_to_winprob(s)) - binary_entropy(q)
