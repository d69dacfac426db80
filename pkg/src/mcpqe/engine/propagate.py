"""Imaginary-time propagation of walker populations driven by measured residuals."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..ansatz import AnsatzState, stochastic_round
from ..qubit.grouping import CommutingGroup, full_selection, sample_groups
from ..stats import ReblockResult, reblock
from .residuals import ExpectationEstimator, Measurement, ResidualEstimator
from .system import StatePreparer, System

log = logging.getLogger(__name__)


class PopulationCollapse(ArithmeticError):
    """The reference population became nonpositive."""


@dataclass(frozen=True)
class PropagationConfig:
    delta_beta: float = 0.2
    n_steps: int = 2000
    initial_population: float = 100.0
    target_population: float | None = None  # default 1.1 x initial_population
    zeta: float = 1.0
    shift_interval: int = 1
    n_hamil: int = 0  # off-diagonal groups sampled per step; 0 = all groups
    sampling_mode: str = "g0"
    rounding: bool = False
    rounding_inclusive: bool = False
    noise: str = "exact"
    n_shots_residual: int = 1000
    n_shots_reference: int = 1000
    sigma: float = 0.0
    s0_floor: float = 1e-6
    freeze_reference: bool = False
    discard_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.delta_beta <= 0:
            raise ValueError("delta_beta must be > 0")
        if not 0 < self.zeta <= 1:
            raise ValueError("zeta must lie in (0, 1]")
        if self.shift_interval < 1:
            raise ValueError("shift_interval must be >= 1")
        if self.n_steps < 1 or self.n_hamil < 0 or self.initial_population <= 0:
            raise ValueError("n_steps >= 1, n_hamil >= 0 and initial_population > 0 required")
        if not 0 <= self.discard_fraction < 1:
            raise ValueError("discard_fraction must lie in [0, 1)")
        self.measurement()  # validates noise settings

    @property
    def population_threshold(self) -> float:
        if self.target_population is None:
            return 1.1 * self.initial_population
        return self.target_population

    def measurement(self) -> Measurement:
        return Measurement(self.noise, self.n_shots_residual, self.n_shots_reference, self.sigma)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class WalkerPopulation:
    n_ref: float
    populations: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return self.populations / self.n_ref

    @property
    def n_tot(self) -> float:
        return float(abs(self.n_ref) + np.abs(self.populations).sum())

    @classmethod
    def from_amplitudes(cls, theta, n_ref: float) -> "WalkerPopulation":
        return cls(float(n_ref), np.asarray(theta, dtype=float) * n_ref)


@dataclass
class TrajectoryRecord:
    step: int
    beta: float
    shift: float
    e_proj: float
    e_numerator: float
    n_tot: float
    n_ref: float
    s0: float
    flagged: bool
    n_groups: int
    n_kept: int
    # per-target numerators <phi_t|H|Psi> and overlaps, reference first
    numerators: np.ndarray = field(repr=False, default=None)
    overlaps: np.ndarray = field(repr=False, default=None)
    extra: dict = field(default_factory=dict)


@dataclass
class RunResult:
    records: list[TrajectoryRecord]
    shift_stats: ReblockResult | None
    energy_stats: ReblockResult | None
    final: AnsatzState
    config: PropagationConfig
    e_ref: float
    n_flagged: int
    n_measurements: int
    final_shift: float = 0.0
    shift_active: bool = False
    extra_stats: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        if hasattr(self.records[0], name):
            return np.array([getattr(r, name) for r in self.records], dtype=float)
        return np.array([r.extra[name] for r in self.records], dtype=float)

    @property
    def discard(self) -> int:
        return int(self.config.discard_fraction * len(self.records))


def step(pop: WalkerPopulation, residuals: np.ndarray, config: PropagationConfig) -> WalkerPopulation:
    """N_i <- N_i - N_0 dbeta r_i for every excitation and, unless frozen, for N_0 via r_0."""
    db = config.delta_beta
    n0 = pop.n_ref
    new_pops = pop.populations - n0 * db * residuals[1:]
    new_ref = n0 if config.freeze_reference else n0 - n0 * db * residuals[0]
    return WalkerPopulation(float(new_ref), new_pops)


def update_shift(s_prev: float, n_tot_now: float, n_tot_prev: float, config: PropagationConfig) -> float:
    if n_tot_now <= 0 or n_tot_prev <= 0:
        raise PopulationCollapse(f"nonpositive population ({n_tot_prev} -> {n_tot_now})")
    a_db = config.shift_interval * config.delta_beta
    return s_prev - config.zeta / a_db * math.log(n_tot_now / n_tot_prev)


def projected_energy(r0: float, s0: float, shift: float, floor: float = 1e-6) -> tuple[float, bool]:
    """(r_0 + S s_0) / s_0, or (nan, True) when |s_0| is below ``floor``."""
    if abs(s0) < floor:
        return float("nan"), True
    return (r0 + shift * s0) / s0, False


@dataclass(frozen=True)
class TrialWavefunction:
    determinants: tuple[int, ...]
    coefficients: tuple[float, ...]

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if len(c) != len(self.determinants) or len(c) == 0:
            raise ValueError("one coefficient per determinant required")
        if abs(np.linalg.norm(c) - 1.0) > 1e-10:
            raise ValueError("trial coefficients must be normalized")

    @classmethod
    def normalized(cls, determinants, coefficients) -> "TrialWavefunction":
        c = np.asarray(coefficients, dtype=float)
        return cls(tuple(int(d) for d in determinants), tuple(c / np.linalg.norm(c)))


def trial_projected_energy(records: list[TrajectoryRecord], targets: list[int],
                           trial: TrialWavefunction, floor: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Per-step sum_j c_j <phi_j|H|Psi> / sum_j c_j <phi_j|Psi>; returns (values, flagged)."""
    pos = {t: k for k, t in enumerate(targets)}
    missing = [d for d in trial.determinants if d not in pos]
    if missing:
        raise ValueError(f"trial determinants {missing} are not measured during propagation")
    idx = np.array([pos[d] for d in trial.determinants])
    c = np.array(trial.coefficients)
    num = np.array([c @ r.numerators[idx] for r in records])
    den = np.array([c @ r.overlaps[idx] for r in records])
    flagged = np.abs(den) < floor
    out = np.where(flagged, np.nan, num / np.where(flagged, 1.0, den))
    return out, flagged


@dataclass(frozen=True)
class Observer:
    """Extra operator measured on the current state each step.

    ``kind`` is ``projected`` (<phi_0|O|Psi>/s_0, sharing the run's s_0) or
    ``expectation`` (<Psi|O|Psi>). ``n_hamil`` None follows the run's group
    sampling; 0 measures every group.
    """

    groups: list
    offset: float = 0.0
    n_hamil: int | None = None
    kind: str = "projected"

    def __post_init__(self):
        if self.kind not in ("projected", "expectation"):
            raise ValueError(f"unknown observer kind {self.kind!r}")


def spawn_streams(seed: int, n: int = 4) -> list[np.random.Generator]:
    """Independent generators for group sampling, rounding, measurement and extras."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _safe_reblock(x: np.ndarray, discard: int) -> ReblockResult | None:
    x = x[discard:]
    x = x[np.isfinite(x)]
    try:
        return reblock(x)
    except ValueError:
        return None


def propagate(config: PropagationConfig, groups: list[CommutingGroup], ansatz: AnsatzState,
              observers: dict[str, Observer] | None = None,
              initial_shift: float | None = None, shift_active: bool = False,
              rngs: list[np.random.Generator] | None = None,
              energy_offset: float = 0.0) -> RunResult:
    """Run the propagation loop for an arbitrary grouped operator (H or the folded operator).

    The shift is kept in the operator's own units; recorded shift and
    projected energies have ``energy_offset`` subtracted. ``observers`` maps
    a name to an Observer whose value <phi_0|O|Psi>/s_0 - offset is
    recorded each step (e.g. H during a folded-spectrum run).
    """
    cfg = config
    rng_groups, rng_round, rng_meas, rng_extra = rngs or spawn_streams(cfg.seed)
    targets = [ansatz.reference] + ansatz.targets
    meas = cfg.measurement()
    est = ResidualEstimator(groups, ansatz.n_qubits, targets, meas)
    obs_est = {}
    for name, ob in (observers or {}).items():
        n_h = cfg.n_hamil if ob.n_hamil is None else ob.n_hamil
        if ob.kind == "expectation":
            oe = ExpectationEstimator(ob.groups, ansatz.n_qubits, meas)
        else:
            oe = ResidualEstimator(ob.groups, ansatz.n_qubits, [ansatz.reference], meas)
        obs_est[name] = (oe, ob.offset, n_h)
    prep = StatePreparer(ansatz)
    pop = WalkerPopulation.from_amplitudes(ansatz.amplitudes, cfg.initial_population)
    shift = initial_shift
    n_tot_prev = pop.n_tot
    records = []
    n_measured_groups = 0
    for it in range(cfg.n_steps):
        state = ansatz.with_amplitudes(pop.theta)
        if cfg.rounding:
            state = stochastic_round(state, rng_round, cfg.rounding_inclusive)
        theta = state.amplitudes
        psi = prep(theta)
        if cfg.n_hamil > 0:
            sel = sample_groups(groups, cfg.n_hamil, rng_groups, cfg.sampling_mode)
        else:
            sel = full_selection(groups)
        n_measured_groups += len(sel.indices)
        g, s = est.estimate(psi, sel, rng_meas)
        e_inst, flagged = projected_energy(g[0], s[0], 0.0, cfg.s0_floor)
        if not shift_active and not flagged:
            shift = e_inst
        if shift is None:
            shift = 0.0
        r = g - shift * s
        extra = {}
        for name, (oe, off, n_h) in obs_est.items():
            osel = sample_groups(oe.groups, n_h, rng_extra, cfg.sampling_mode) \
                if n_h > 0 else full_selection(oe.groups)
            if isinstance(oe, ExpectationEstimator):
                val = oe.estimate(psi, osel, rng_extra)
            else:
                og, _ = oe.estimate(psi, osel, rng_extra)
                val, _ = projected_energy(og[0], s[0], 0.0, cfg.s0_floor)
            extra[name] = val - off
        records.append(TrajectoryRecord(
            step=it, beta=(it + 1) * cfg.delta_beta, shift=float(shift) - energy_offset,
            e_proj=float(e_inst) - energy_offset, e_numerator=float(g[0]), n_tot=pop.n_tot,
            n_ref=pop.n_ref, s0=float(s[0]), flagged=bool(flagged), n_groups=len(sel.indices),
            n_kept=int(np.count_nonzero(theta)), numerators=np.asarray(g, dtype=float),
            overlaps=np.asarray(s, dtype=float), extra=extra))
        pop = step(pop, r, cfg)
        if pop.n_ref <= 0 or not np.all(np.isfinite(pop.populations)):
            raise PopulationCollapse(f"reference population {pop.n_ref} at step {it}")
        if not shift_active and pop.n_tot >= cfg.population_threshold:
            shift_active = True
            n_tot_prev = pop.n_tot
        elif shift_active and (it + 1) % cfg.shift_interval == 0:
            shift = update_shift(shift, pop.n_tot, n_tot_prev, cfg)
            n_tot_prev = pop.n_tot
    final = ansatz.with_amplitudes(pop.theta)
    result = RunResult(records, None, None, final, cfg, energy_offset,
                       n_flagged=sum(r.flagged for r in records),
                       n_measurements=0, final_shift=float(shift), shift_active=shift_active)
    d = result.discard
    result.shift_stats = _safe_reblock(result.series("shift"), d)
    result.energy_stats = _safe_reblock(result.series("e_proj"), d)
    for name in obs_est:
        result.extra_stats[name] = _safe_reblock(result.series(name), d)
    per_group = cfg.n_shots_residual if cfg.noise == "shots" else 1
    # (n_param + 1) n_iter n_hamil n_shots, with n_hamil the groups measured per step
    result.n_measurements = int(len(targets) * n_measured_groups * per_group)
    return result


def run_ground(config: PropagationConfig, system: System, ansatz: AnsatzState | None = None,
               **kwargs) -> RunResult:
    """MC-PQE ground-state run; recorded energies are relative to ``system.e_ref``."""
    ansatz = ansatz if ansatz is not None else system.ansatz()
    return propagate(config, system.groups, ansatz, energy_offset=system.e_ref, **kwargs)


# -------------------------------------------------------------------- output

TRAJECTORY_COLUMNS = ["step", "beta", "shift", "e_proj", "n_tot", "s0", "flags",
                      "e_numerator", "n_ref", "n_groups", "n_kept"]


def trajectory_csv(result: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extras = sorted(result.records[0].extra) if result.records else []
    w.writerow(TRAJECTORY_COLUMNS + extras)
    for r in result.records:
        w.writerow([r.step, repr(r.beta), repr(r.shift), repr(r.e_proj), repr(r.n_tot), repr(r.s0),
                    int(r.flagged), repr(r.e_numerator), repr(r.n_ref), r.n_groups, r.n_kept]
                   + [repr(float(r.extra[k])) for k in extras])
    return buf.getvalue()


def restart_text(result: RunResult, rngs: list[np.random.Generator] | None = None) -> str:
    """JSON restart: ansatz dump, shift, reference population and generator states."""
    last = result.records[-1]
    doc = {
        "ansatz": result.final.dump(),
        "shift": result.final_shift,
        "shift_active": result.shift_active,
        "n_ref": last.n_ref,
        "rng": [g.bit_generator.state for g in rngs] if rngs else None,
    }
    return json.dumps(doc, indent=1, sort_keys=True, default=int) + "\n"


def load_restart(text: str) -> dict:
    doc = json.loads(text)
    doc["ansatz"] = AnsatzState.load(doc["ansatz"])
    if doc.get("rng"):
        gens = []
        for st in doc["rng"]:
            g = np.random.default_rng()
            g.bit_generator.state = st
            gens.append(g)
        doc["rng"] = gens
    return doc


def with_overrides(config: PropagationConfig, **kw) -> PropagationConfig:
    return replace(config, **kw)
