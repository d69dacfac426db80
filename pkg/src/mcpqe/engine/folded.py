"""Folded-spectrum excited states: propagate (H - omega)^2 with the ground-state engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..ansatz import AnsatzState
from ..qubit.grouping import CommutingGroup, group_qubitwise
from ..qubit.pauli import square_shifted
from .propagate import Observer, PropagationConfig, RunResult, propagate
from .system import System


@dataclass
class FoldedResult:
    run: RunResult
    omega: float
    reference: int
    folded: float  # mean folded eigenvalue (Hartree^2) from E_proj of (H - omega)^2
    energy: float  # omega +- sqrt(folded), sign fixed by the H observer
    energy_h: float  # mean projected energy of H itself
    energy_h_error: float
    switched: bool = False

    @property
    def final(self) -> AnsatzState:
        return self.run.final


def folded_groups(system: System, omega: float) -> list[CommutingGroup]:
    """Groups of (H - omega)^2 with omega relative to ``system.e_ref``."""
    key = ("folded", round(float(omega), 12))
    if key not in system._cache:
        op = square_shifted(system.hamiltonian, omega + system.e_ref)
        system._cache[key] = group_qubitwise(op, system.grouping)
    return system._cache[key]


def recover_energy(omega: float, folded: float, energy_h: float) -> float:
    """omega +- sqrt(folded), choosing the branch nearer the measured <H>."""
    root = math.sqrt(max(folded, 0.0))
    lo, hi = omega - root, omega + root
    if not math.isfinite(energy_h):
        return lo
    return lo if abs(lo - energy_h) <= abs(hi - energy_h) else hi


def _stat(stats, series):
    if stats is not None:
        return stats.mean, stats.stderr
    x = series[np.isfinite(series)]
    return (float(x.mean()) if x.size else float("nan")), float("nan")


def run_folded_spectrum(config: PropagationConfig, system: System, omega: float,
                        reference: int | None = None, warm_start: AnsatzState | None = None,
                        observer_n_hamil: int | None = 0, **kwargs) -> FoldedResult:
    """One folded-spectrum propagation targeting the eigenstate nearest ``omega``.

    ``omega`` and all reported energies are relative to ``system.e_ref``. The
    shift and E_proj of the run are in Hartree^2. ``warm_start`` supplies
    initial amplitudes for a pool built on the same reference. <H> is
    measured as a plain expectation value on the prepared state, over every
    group by default (``observer_n_hamil=0``); None makes it follow the run's
    group sampling.
    """
    ansatz = system.ansatz(reference)
    if warm_start is not None:
        if [e.label for e in warm_start.excitations] != [e.label for e in ansatz.excitations]:
            raise ValueError("warm start pool does not match the ansatz pool")
        ansatz = ansatz.with_amplitudes(warm_start.amplitudes)
    groups = folded_groups(system, omega)
    run = propagate(config, groups, ansatz,
                    observers={"e_h": Observer(system.groups, system.e_ref, observer_n_hamil,
                                                    "expectation")}, **kwargs)
    folded, _ = _stat(run.energy_stats, run.series("e_proj")[run.discard:])
    e_h, e_h_err = _stat(run.extra_stats.get("e_h"), run.series("e_h")[run.discard:])
    return FoldedResult(run, float(omega), ansatz.reference, folded,
                        recover_energy(omega, folded, e_h), e_h, e_h_err)


def folded_scan(config: PropagationConfig, systems: list[System], omega: float,
                reference: int | None = None, window: float = 0.05,
                warm: bool = True, first_n_steps: int | None = None) -> list[FoldedResult]:
    """Follow one state along a geometry scan.

    Each point starts from the previous point's amplitudes and uses its
    absolute energy as omega (re-expressed relative to the new reference
    energy). A point whose absolute <H> moves by more than ``window``
    Hartree from the previous one is flagged as a possible state switch.
    ``first_n_steps`` lengthens the cold-started first point.
    """
    out: list[FoldedResult] = []
    prev, prev_abs = None, None
    for k, system in enumerate(systems):
        cfg = replace(config, seed=config.seed + k)
        if k == 0 and first_n_steps:
            cfg = replace(cfg, n_steps=first_n_steps)
        w = omega if prev is None else prev_abs - system.e_ref
        start = prev.final if (prev is not None and warm) else None
        res = run_folded_spectrum(cfg, system, w, reference, warm_start=start)
        e_abs = res.energy_h + system.e_ref
        if prev is not None and abs(e_abs - prev_abs) > window:
            res.switched = True
        out.append(res)
        prev, prev_abs = res, e_abs
    return out


def assign_states(energies, eigenvalues) -> tuple[np.ndarray, float]:
    """Match computed energies to distinct eigenvalues; returns (index per state, max deviation)."""
    e = np.asarray(energies, dtype=float)
    ev = np.asarray(eigenvalues, dtype=float)
    cost = np.abs(e[:, None] - ev[None, :])
    rows, cols = linear_sum_assignment(cost)
    idx = np.empty(e.size, dtype=int)
    idx[rows] = cols
    return idx, float(cost[rows, cols].max())
