"""End-to-end pipeline and sweep drivers with CSV/JSON reporting.

Configuration is the flat ``section.key = value`` format (see
calibration.parse_flat); every value here has a default, so an empty
config runs the 11 km operating point out of the box.  Reports are
canonical: byte-for-byte reproducible from (config, seed), floats at
full round-trip precision, and a config hash in every artifact.

Exit codes: 0 success, 2 protocol abort, 3 config error, 4 numerical
infeasibility.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import calibration, eat, link, protocol, renyi
from .calibration import DistanceCalibration, load_distance_table, load_error_budget, load_link_defaults
from .eat import EatBudget, HonestModel
from .mathcore import binomial_tail, chsh_to_winprob
from .quantum import NoiseParams, build_heralded_state
from .renyi import RenyiConfig, build_acceptance_set, q_honest

__all__ = [
    "ConfigError",
    "InfeasibleError",
    "ProtocolAbort",
    "RunConfig",
    "KeyRateReport",
    "run_pipeline",
    "sweep_keyrate_vs_n",
    "sweep_asymptotic_contour",
    "sweep_rate_vs_distance",
    "pvalue_table",
    "error_budget_report",
    "main",
]

WORKERS_ENV = "DIQKD_WORKERS"


class ConfigError(ValueError):
    """Bad or inconsistent run configuration (exit code 3)."""


class InfeasibleError(RuntimeError):
    """The requested evaluation has no feasible answer (exit code 4)."""


class ProtocolAbort(RuntimeError):
    """The simulated run failed its acceptance test (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; every field has a paper-point default."""

    # physical model (11 km calibration)
    v_zz: float = 0.943
    v_xx: float = 0.924
    white_noise: float = 0.0
    readout_flip: float = 0.0
    delta_phi: float = 0.0
    sign: int = +1
    # protocol
    n: int = 1_208_000
    gamma_a: float = 0.26
    gamma_b: float = 0.13
    omega_exp: Optional[float] = None  # None: honest model win probability
    delta: Optional[float] = None  # None: calibrated to the completeness target
    seed: int = 20260808
    abort_is_error: bool = True
    # security
    eps_snd: float = 1e-5
    eps_ec: float = 2.0**-61
    eps_ec_com: float = 0.005
    eps_com_at: float = 0.005
    eps_ea_com: float = 1e-2
    method: str = "both"  # eat | renyi | both
    renyi_alpha: Optional[float] = None
    analytic: bool = False
    s_obs: Optional[float] = None  # analytic-mode CHSH value (None: model value)
    q_obs: Optional[float] = None
    # link
    length_km: float = 11.0
    alpha_excitation: float = 0.022
    collection: float = 0.085
    fiber_coupling: float = 0.50
    qfc: float = 0.47
    insertion: float = 0.86
    bsm: float = 0.765
    detector: float = 0.85
    atten_db_per_km: float = 0.32
    measured_arm_transmission: Optional[float] = None
    overhead_s: float = 12e-6
    duty_cycle: float = 0.15
    # sweep grids (comma-separated; used when the flags are absent)
    sweep_n_grid: str = "1e4,3e4,1e5,3e5,1e6,1.208e6,3e6,1e7"
    sweep_s_grid: str = ""
    sweep_q_grid: str = ""
    sweep_gamma: float = 1e-3
    sweep_lengths: str = ""
    # output
    out_dir: str = "."
    out_format: str = "json"  # json | csv
    # raw echo for hashing
    raw_items: tuple = field(default_factory=tuple, compare=False)

    def __post_init__(self) -> None:
        if self.method not in ("eat", "renyi", "both"):
            raise ConfigError(f"method must be eat, renyi or both, got {self.method!r}")
        if self.out_format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.out_format!r}")
        if self.n < 1:
            raise ConfigError("protocol.n must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def config_hash(self) -> str:
        payload = json.dumps(sorted(self.raw_items), separators=(",", ":")).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


_SCHEMA = {
    "physical.v_zz": ("v_zz", float),
    "physical.v_xx": ("v_xx", float),
    "physical.white_noise": ("white_noise", float),
    "physical.readout_flip": ("readout_flip", float),
    "physical.delta_phi": ("delta_phi", float),
    "physical.sign": ("sign", int),
    "protocol.n": ("n", int),
    "protocol.gamma_a": ("gamma_a", float),
    "protocol.gamma_b": ("gamma_b", float),
    "protocol.omega_exp": ("omega_exp", float),
    "protocol.delta": ("delta", float),
    "protocol.abort_is_error": ("abort_is_error", lambda s: s.lower() in ("1", "true", "yes")),
    "security.eps_snd": ("eps_snd", float),
    "security.eps_ec": ("eps_ec", float),
    "security.eps_ec_com": ("eps_ec_com", float),
    "security.eps_com_at": ("eps_com_at", float),
    "security.eps_ea_com": ("eps_ea_com", float),
    "security.method": ("method", str),
    "security.renyi_alpha": ("renyi_alpha", float),
    "security.analytic": ("analytic", lambda s: s.lower() in ("1", "true", "yes")),
    "analysis.s_obs": ("s_obs", float),
    "analysis.q_obs": ("q_obs", float),
    "link.length_km": ("length_km", float),
    "link.alpha_excitation": ("alpha_excitation", float),
    "link.collection": ("collection", float),
    "link.fiber_coupling": ("fiber_coupling", float),
    "link.qfc": ("qfc", float),
    "link.insertion": ("insertion", float),
    "link.bsm": ("bsm", float),
    "link.detector": ("detector", float),
    "link.atten_db_per_km": ("atten_db_per_km", float),
    "link.measured_arm_transmission": ("measured_arm_transmission", float),
    "timing.overhead_s": ("overhead_s", float),
    "timing.duty_cycle": ("duty_cycle", float),
    "sweep.n_grid": ("sweep_n_grid", str),
    "sweep.s_grid": ("sweep_s_grid", str),
    "sweep.q_grid": ("sweep_q_grid", str),
    "sweep.gamma": ("sweep_gamma", float),
    "sweep.lengths": ("sweep_lengths", str),
    "output.dir": ("out_dir", str),
    "output.format": ("out_format", str),
    "seed": ("seed", int),
}


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Config file plus command-line overrides, validated into a RunConfig."""
    items: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            items = calibration.parse_flat(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if overrides:
        items.update({k: str(v) for k, v in overrides.items() if v is not None})
    kwargs = {}
    for key, value in items.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        name, conv = _SCHEMA[key]
        try:
            kwargs[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    try:
        return RunConfig(raw_items=tuple(sorted(items.items())), **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class KeyRateReport:
    """Everything one pipeline run produced, in canonical serializable form."""

    config_hash: str
    inputs: dict
    s_model: float
    q_model: float
    s_hat: Optional[float]
    s_err: Optional[float]
    q_hat: Optional[float]
    q_err: Optional[float]
    beta_freq: Optional[float]
    accepted: Optional[bool]
    accepted_box: Optional[bool]
    rng_draws: int
    link_summary: dict
    eat_length: Optional[float]
    eat_raw_length: Optional[float]
    eat_rate: Optional[float]
    eat_splits: Optional[dict]
    eat_pt: Optional[float]
    eat_delta: Optional[float]
    renyi_length: Optional[float]
    renyi_raw_length: Optional[float]
    renyi_rate: Optional[float]
    renyi_alpha: Optional[float]
    renyi_h_alpha: Optional[float]
    leak_ec_bits: Optional[float]
    asymptotic_sifted: float
    asymptotic_nosift: float
    wall_time_s: float = 0.0  # informational; excluded from canonical bytes

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("wall_time_s")
        return json.dumps(d, sort_keys=True, indent=1) + "\n"


def _model_behavior(config: RunConfig):
    noise = NoiseParams.from_visibilities(
        config.v_zz,
        config.v_xx,
        white_noise=config.white_noise,
        readout_flip=config.readout_flip,
        sign=config.sign,
    )
    state = build_heralded_state(noise)
    return protocol.behavior_from_state(state, readout_flip=config.readout_flip)


def run_pipeline(config: RunConfig) -> KeyRateReport:
    """Model -> (transcript) -> estimates -> acceptance -> key lengths."""
    t0 = time.perf_counter()
    try:
        behavior = _model_behavior(config)
    except ValueError as exc:
        raise ConfigError(f"physical model: {exc}") from exc
    s_model = behavior.chsh_value()
    q_model = behavior.key_qber()
    omega_exp = config.omega_exp if config.omega_exp is not None else behavior.chsh_win_probability()

    if config.analytic:
        s_eval = config.s_obs if config.s_obs is not None else s_model
        q_eval = config.q_obs if config.q_obs is not None else q_model
        s_hat = s_err = q_hat = q_err = beta = None
        accepted = accepted_box = None
        draws = 0
    else:
        delta = config.delta
        if delta is None:
            delta = eat.delta_for_completeness(
                config.n, config.gamma_a, config.gamma_b, omega_exp, target=config.eps_ea_com
            )
        try:
            params = protocol.ProtocolParams(
                n=config.n,
                gamma_a=config.gamma_a,
                gamma_b=config.gamma_b,
                omega_exp=omega_exp,
                delta=delta,
                seed=config.seed,
            )
        except ValueError as exc:
            raise ConfigError(f"protocol parameters: {exc}") from exc
        from . import rng as _rng

        before = _rng.audit_total()
        tr = protocol.generate_transcript(behavior, params)
        draws = _rng.audit_total() - before
        tr = protocol.sift(tr)
        beta = protocol.test_statistic(tr)
        accepted = protocol.accept(beta, params)
        est = protocol.estimate(tr)
        s_hat, s_err, q_hat, q_err = est.s_hat, est.s_err, est.q_hat, est.q_err
        counts = est.counts
        freq = np.array([counts[0], counts[1], counts[2]], dtype=float) / config.n
        acc_set = build_acceptance_set(
            q_honest(config.gamma_a, config.gamma_b, omega_exp), config.n, config.eps_com_at
        )
        accepted_box = acc_set.contains(freq)
        s_eval = config.s_obs if config.s_obs is not None else s_model
        q_eval = config.q_obs if config.q_obs is not None else q_model

    try:
        model = HonestModel.from_chsh(s_eval, q_eval, config.gamma_a, config.gamma_b)
    except ValueError as exc:
        raise ConfigError(f"operating point: {exc}") from exc
    try:
        lec = eat.leak_ec(config.n, model, config.eps_ec_com)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from exc

    try:
        budget_l = link.LinkBudget(
            collection=config.collection,
            fiber_coupling=config.fiber_coupling,
            qfc=config.qfc,
            insertion=config.insertion,
            bsm=config.bsm,
            detector=config.detector,
            atten_db_per_km=config.atten_db_per_km,
            length_km=config.length_km,
            measured_arm_transmission=config.measured_arm_transmission,
        )
        timing = link.TimingModel(overhead_s=config.overhead_s, duty_cycle=config.duty_cycle)
    except ValueError as exc:
        raise ConfigError(f"link budget: {exc}") from exc
    eff = link.arm_efficiency(budget_l)
    p_s = link.success_probability_spi(config.alpha_excitation, eff, config.alpha_excitation, eff)
    link_summary = {
        "length_km": config.length_km,
        "arm_efficiency": eff,
        "p_spi": p_s,
        "events_per_s": link.event_rate(p_s, timing, config.length_km),
    }

    eat_res = renyi_res = None
    if config.method in ("eat", "both"):
        try:
            eat_res = eat.key_length_eat(
                config.n, model, EatBudget(eps_snd=config.eps_snd, eps_ec=config.eps_ec, eps_ec_com=config.eps_ec_com),
                delta=config.delta,
            )
        except ValueError as exc:
            raise InfeasibleError(str(exc)) from exc
    if config.method in ("renyi", "both"):
        eps_sec = config.eps_snd - config.eps_ec
        if eps_sec <= 0:
            raise InfeasibleError("eps_snd leaves no room for secrecy after eps_ec")
        acc = build_acceptance_set(
            q_honest(config.gamma_a, config.gamma_b, model.omega), config.n, config.eps_com_at
        )
        try:
            renyi_res = renyi.key_length_renyi(
                config.n, model, RenyiConfig(alpha=config.renyi_alpha, eps_sec=eps_sec, eps_com_at=config.eps_com_at),
                acc, lec,
            )
        except ValueError as exc:
            raise InfeasibleError(str(exc)) from exc

    report = KeyRateReport(
        config_hash=config.config_hash(),
        inputs={
            "n": config.n,
            "gamma_a": config.gamma_a,
            "gamma_b": config.gamma_b,
            "omega_exp": omega_exp,
            "eps_snd": config.eps_snd,
            "method": config.method,
            "analytic": config.analytic,
            "seed": config.seed,
            "s_eval": s_eval,
            "q_eval": q_eval,
        },
        s_model=s_model,
        q_model=q_model,
        s_hat=s_hat,
        s_err=s_err,
        q_hat=q_hat,
        q_err=q_err,
        beta_freq=beta,
        accepted=accepted,
        accepted_box=accepted_box,
        rng_draws=draws,
        link_summary=link_summary,
        eat_length=None if eat_res is None else eat_res.length,
        eat_raw_length=None if eat_res is None else eat_res.raw_length,
        eat_rate=None if eat_res is None else eat_res.rate,
        eat_splits=None
        if eat_res is None
        else {
            "eps_pa": eat_res.budget.eps_pa,
            "eps_s": eat_res.budget.eps_s,
            "eps_s_prime": eat_res.budget.eps_s_prime,
            "eps_s_dprime": eat_res.budget.eps_s_dprime,
            "eps_ea": eat_res.budget.eps_ea,
        },
        eat_pt=None if eat_res is None else eat_res.pt_opt,
        eat_delta=None if eat_res is None else eat_res.delta,
        renyi_length=None if renyi_res is None else renyi_res.length,
        renyi_raw_length=None if renyi_res is None else renyi_res.raw_length,
        renyi_rate=None if renyi_res is None else renyi_res.rate,
        renyi_alpha=None if renyi_res is None else renyi_res.alpha,
        renyi_h_alpha=None if renyi_res is None else renyi_res.h_alpha_bits,
        leak_ec_bits=lec,
        asymptotic_sifted=eat.asymptotic_rate_sifted(s_eval, q_eval, config.gamma_a, config.gamma_b),
        asymptotic_nosift=eat.asymptotic_rate_nosift(s_eval, q_eval),
        wall_time_s=time.perf_counter() - t0,
    )
    return report


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _sweep_point_n(args):
    n, s_eval, q_eval, ga, gb, eps_snd, eps_ec, eps_ec_com, eps_com_at = args
    model = HonestModel.from_chsh(s_eval, q_eval, ga, gb)
    lec = eat.leak_ec(n, model, eps_ec_com)
    eat_res = eat.key_length_eat(n, model, EatBudget(eps_snd=eps_snd, eps_ec=eps_ec, eps_ec_com=eps_ec_com))
    acc = build_acceptance_set(q_honest(ga, gb, model.omega), n, eps_com_at)
    ren = renyi.key_length_renyi(n, model, RenyiConfig(eps_sec=eps_snd - eps_ec, eps_com_at=eps_com_at), acc, lec)
    return (n, eat_res.length / n, ren.length / n)


def sweep_keyrate_vs_n(config: RunConfig, n_grid: list[int]) -> list[dict]:
    """Finite-size rates of both methods vs block size, plus the asymptote."""
    behavior = _model_behavior(config)
    s_eval = config.s_obs if config.s_obs is not None else behavior.chsh_value()
    q_eval = config.q_obs if config.q_obs is not None else behavior.key_qber()
    asym = eat.asymptotic_rate_sifted(s_eval, q_eval, config.gamma_a, config.gamma_b)
    jobs = [
        (int(n), s_eval, q_eval, config.gamma_a, config.gamma_b,
         config.eps_snd, config.eps_ec, config.eps_ec_com, config.eps_com_at)
        for n in sorted(n_grid)
    ]
    if _workers() > 1:
        with ProcessPoolExecutor(max_workers=_workers()) as pool:
            results = list(pool.map(_sweep_point_n, jobs))
    else:
        results = [_sweep_point_n(j) for j in jobs]
    return [
        {"n": n, "rate_eat": re_, "rate_renyi": rr, "rate_asym": asym}
        for (n, re_, rr) in results
    ]


def sweep_asymptotic_contour(s_grid: list[float], q_grid: list[float], gamma: float = 1e-3) -> dict:
    """Sifting-free asymptotic rate on an (S, Q) grid, with the zero contour."""
    rates = np.empty((len(s_grid), len(q_grid)))
    for i, s in enumerate(sorted(s_grid)):
        for j, q in enumerate(sorted(q_grid)):
            rates[i, j] = eat.asymptotic_rate_nosift(s, q)
    zero = []
    s_sorted, q_sorted = sorted(s_grid), sorted(q_grid)
    for i, s in enumerate(s_sorted):
        row = rates[i]
        sign_change = np.where(np.diff(np.sign(row)))[0]
        if len(sign_change):
            j = int(sign_change[0])
            q0, q1 = q_sorted[j], q_sorted[j + 1]
            r0, r1 = row[j], row[j + 1]
            zero.append({"s": s, "q_zero": q0 + (q1 - q0) * (0.0 - r0) / (r1 - r0)})
    return {"s_grid": s_sorted, "q_grid": q_sorted, "rates": rates.tolist(), "zero_contour": zero, "gamma": gamma}


def sweep_rate_vs_distance(config: RunConfig, table: Optional[list[DistanceCalibration]] = None) -> list[dict]:
    """Per-length link and key-rate summary from the calibration bundle."""
    defaults, timing = load_link_defaults()
    rows_out = []
    for row in sorted(table or load_distance_table(), key=lambda r: r.length_km):
        eff = link.arm_efficiency(row.link_budget(defaults))
        a = row.alpha_excitation
        p_spi = link.success_probability_spi(a, eff, a, eff)
        p_tpi = link.success_probability_tpi(eff, eff)
        rate_s = link.event_rate(p_spi, timing, row.length_km)
        rate_tpi = link.event_rate(p_tpi, timing, row.length_km)
        s_model = math.sqrt(2.0) * (row.v_zz + row.v_xx)
        per_event = eat.asymptotic_rate_nosift(s_model, row.qber)
        fidelity = 0.25 * (1.0 + row.v_zz + 2.0 * row.v_xx)
        rows_out.append(
            {
                "length_km": row.length_km,
                "arm_efficiency": eff,
                "p_spi": p_spi,
                "p_tpi": p_tpi,
                "events_per_s": rate_s,
                "events_per_s_tpi": rate_tpi,
                "s_model": s_model,
                "qber": row.qber,
                "fidelity_model": fidelity,
                "fidelity_target": row.fidelity,
                "rate_per_event": per_event,
                "rate_per_s": per_event * rate_s,
            }
        )
    return rows_out


def pvalue_table(rows: Optional[list[tuple[float, int, float]]] = None) -> list[dict]:
    """Game-level significance: exact binomial tail at the classical bound.

    rows are (length_km, n_trials, s_obs); the win count is reconstructed
    as round(n * winprob(s_obs)).  Defaults to the shipped calibration
    (back-solved scores, see the data file).
    """
    if rows is None:
        rows = [(r.length_km, r.n_trials, r.s_pvalue) for r in load_distance_table()]
    out = []
    for length, n, s_obs in rows:
        omega = chsh_to_winprob(s_obs)
        k = int(round(n * omega))
        tail = binomial_tail(n, k, 0.75)
        out.append({"length_km": length, "n_trials": n, "s_obs": s_obs, "k": k, "log10_p": tail.log10})
    return out


def error_budget_report() -> list[dict]:
    """Row sums of the infidelity budget vs the measured infidelity."""
    sources, table = load_error_budget()
    fidelity = {r.length_km: r.fidelity for r in load_distance_table()}
    out = []
    for length, row in sorted(table.items()):
        total = row["total"]
        ssum = sum(row[s] for s in sources)
        measured = 1.0 - fidelity[length]
        out.append(
            {
                "length_km": length,
                **{s: row[s] for s in sources},
                "total": total,
                "row_sum": ssum,
                "measured_infidelity": measured,
                "within_budget": bool(measured <= total + 1e-12),
            }
        )
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(rows: list[dict], path: Path, config_hash: str) -> None:
    if not rows:
        raise InfeasibleError("nothing to write")
    cols = list(rows[0].keys())
    lines = [f"# config_hash = {config_hash}", ",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_grid(text: str, conv=float) -> list:
    return [conv(tok) for tok in text.split(",") if tok.strip()]


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="diqkd", description="Heralded-link CHSH key-rate toolkit")
    parser.add_argument("--config", default=None, help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="64-bit master seed override")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--analytic", action="store_true", help="skip simulation; evaluate stated (S, Q)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("pipeline", help="single end-to-end run")
    p_n = sub.add_parser("sweep-n", help="key rate vs block size")
    p_n.add_argument("--n-grid", default=None)
    p_c = sub.add_parser("contour", help="asymptotic rate over (S, Q)")
    p_c.add_argument("--s-grid", default=None)
    p_c.add_argument("--q-grid", default=None)
    p_c.add_argument("--gamma", type=float, default=None)
    sub.add_parser("distance", help="link and rate summary per fiber length")
    sub.add_parser("pvalues", help="binomial-test table per fiber length")
    sub.add_parser("budget", help="infidelity budget consistency report")

    args = parser.parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output.dir"] = args.out
    if args.format is not None:
        overrides["output.format"] = args.format
    if args.analytic:
        overrides["security.analytic"] = "true"

    try:
        config = load_config(args.config, overrides)
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        h = config.config_hash()

        if args.command == "pipeline":
            report = run_pipeline(config)
            path = out_dir / "report.json"
            path.write_text(report.to_json(), encoding="utf-8")
            print(f"wrote {path} (wall time {report.wall_time_s:.2f}s)", file=sys.stderr)
            print(report.to_json(), end="")
            if config.abort_is_error and report.accepted is False:
                return 2
            return 0

        if args.command == "sweep-n":
            grid = args.n_grid if args.n_grid is not None else config.sweep_n_grid
            rows = sweep_keyrate_vs_n(config, [int(float(x)) for x in _parse_grid(grid)])
            write_csv(rows, out_dir / "keyrate_vs_n.csv", h)
        elif args.command == "contour":
            s_grid = args.s_grid if args.s_grid is not None else (
                config.sweep_s_grid or ",".join(str(s) for s in np.linspace(2.0, 2.828, 25).round(4))
            )
            q_grid = args.q_grid if args.q_grid is not None else (
                config.sweep_q_grid or ",".join(str(q) for q in np.linspace(0.0, 0.12, 25).round(4))
            )
            gamma = args.gamma if args.gamma is not None else config.sweep_gamma
            res = sweep_asymptotic_contour(_parse_grid(s_grid), _parse_grid(q_grid), gamma)
            grid_rows = [
                {"s": s, "q": q, "rate": res["rates"][i][j]}
                for i, s in enumerate(res["s_grid"])
                for j, q in enumerate(res["q_grid"])
            ]
            write_csv(grid_rows, out_dir / "contour.csv", h)
            if res["zero_contour"]:
                write_csv(res["zero_contour"], out_dir / "contour_zero.csv", h)
        elif args.command == "distance":
            rows = sweep_rate_vs_distance(config)
            if config.sweep_lengths:
                keep = {float(x) for x in _parse_grid(config.sweep_lengths)}
                rows = [r for r in rows if r["length_km"] in keep]
            write_csv(rows, out_dir / "distance.csv", h)
        elif args.command == "pvalues":
            write_csv(pvalue_table(), out_dir / "pvalues.csv", h)
        elif args.command == "budget":
            write_csv(error_budget_report(), out_dir / "budget.csv", h)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except ProtocolAbort as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
