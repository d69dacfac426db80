"""Batched estimation of the Hadamard-test quantities for every target determinant.

For targets phi_t (reference first) and groups G_k the estimator returns
``g_t = sum_k w_k <phi_t|G_k|Psi>`` and ``s_t = <phi_t|Psi>``, real parts.
Exact mode evaluates these directly from the amplitudes. Shot mode samples
the joint (ancilla, register) outcome distribution of the one-ancilla circuit
after the group's basis rotation, which in closed form is
``1/4 |R phi_t +- R Psi|^2``; the Gaussian mode adds N(0, sigma ||h_k||_2)
per group and N(0, sigma) per overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..qubit.grouping import CommutingGroup, GroupSample
from ..qubit.pauli import parity_array, popcount
from ..statevector import apply_gates, measurement_basis_gates

_I_POW = np.array([1.0, 1j, -1.0, -1j])


@dataclass(frozen=True)
class Measurement:
    mode: str = "exact"  # exact | shots | gaussian
    n_shots_residual: int = 1000
    n_shots_reference: int = 1000
    sigma: float = 0.0

    def __post_init__(self):
        if self.mode not in ("exact", "shots", "gaussian"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.mode == "shots" and min(self.n_shots_residual, self.n_shots_reference) < 1:
            raise ValueError("shot counts must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


class ResidualEstimator:
    def __init__(self, groups: list[CommutingGroup], n_qubits: int, targets: list[int],
                 measurement: Measurement = Measurement()):
        self.groups = groups
        self.n = n_qubits
        self.targets = np.asarray(targets, dtype=np.int64)
        self.measurement = measurement
        self.shots = np.full(len(targets), measurement.n_shots_residual)
        self.shots[0] = measurement.n_shots_reference
        par = parity_array(n_qubits)
        t = self.targets
        self._rows = []
        for g in groups:
            rows, cols, vals = [], [], []
            for m in g.members:
                src = t ^ m.x
                rows.append(np.arange(t.size))
                cols.append(src)
                vals.append(m.coefficient * _I_POW[popcount(m.x & m.z) % 4]
                            * (1 - 2 * par[src & m.z].astype(float)))
            a = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(t.size, 1 << n_qubits))
            self._rows.append(a)
        self._stacked = sp.vstack(self._rows).tocsr()
        self._norms = np.array([g.l2_norm() for g in groups])
        self._rotated_targets: dict[int, np.ndarray] = {}
        self._values: dict[int, np.ndarray] = {}

    # exact pieces -------------------------------------------------------
    def group_matrix(self, psi: np.ndarray) -> np.ndarray:
        """<phi_t|G_k|Psi> for all groups (rows) and targets (columns)."""
        return (self._stacked @ psi).reshape(len(self.groups), self.targets.size)

    def exact(self, psi: np.ndarray, selection: GroupSample | None = None):
        if selection is None:
            g = self.group_matrix(psi).sum(axis=0)
        else:
            g = sum(w * (self._rows[k] @ psi) for k, w in selection)
        return np.real(g), np.real(psi[self.targets])

    # shot pieces --------------------------------------------------------
    def _group_data(self, k: int):
        if k not in self._values:
            n = self.n
            gates = measurement_basis_gates(self.groups[k], n)
            rot = np.zeros((self.targets.size, 1 << n), dtype=complex)
            for j, t in enumerate(self.targets):
                v = np.zeros(1 << n, dtype=complex)
                v[t] = 1.0
                rot[j] = apply_gates(v, n, gates)
            self._rotated_targets[k] = rot
            par = parity_array(n)
            b = np.arange(1 << n)
            vals = np.zeros(1 << n)
            for m in self.groups[k].members:
                vals += np.real(m.coefficient) * (1 - 2 * par[b & m.support])
            self._values[k] = vals
        return self._rotated_targets[k], self._values[k]

    def _shot_group(self, psi: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        rot_t, vals = self._group_data(k)
        v = apply_gates(psi.astype(complex), self.n, measurement_basis_gates(self.groups[k], self.n))
        p_plus = 0.25 * np.abs(rot_t + v) ** 2
        p_minus = 0.25 * np.abs(rot_t - v) ** 2
        pvals = np.concatenate([p_plus, p_minus], axis=1)
        pvals /= pvals.sum(axis=1, keepdims=True)
        counts = rng.multinomial(self.shots, pvals)
        return counts @ np.concatenate([vals, -vals]) / self.shots

    def _shot_overlaps(self, psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        s = np.clip(np.real(psi[self.targets]), -1.0, 1.0)
        k = rng.binomial(self.shots, 0.5 * (1.0 + s))
        return 2.0 * k / self.shots - 1.0

    # public -------------------------------------------------------------
    def estimate(self, psi: np.ndarray, selection: GroupSample | None, rng: np.random.Generator):
        """Weighted group sum g_t and overlaps s_t under the configured measurement."""
        mode = self.measurement.mode
        sel = list(selection) if selection is not None else [(k, 1.0) for k in range(len(self.groups))]
        if mode == "exact":
            return self.exact(psi, selection)
        if mode == "gaussian":
            sigma = self.measurement.sigma
            g = np.zeros(self.targets.size)
            for k, w in sel:
                exact_k = np.real(self._rows[k] @ psi)
                g += w * (exact_k + rng.normal(0.0, sigma * self._norms[k], self.targets.size))
            s = np.real(psi[self.targets]) + rng.normal(0.0, sigma, self.targets.size)
            return g, s
        g = np.zeros(self.targets.size)
        for k, w in sel:
            g += w * self._shot_group(psi, k, rng)
        return g, self._shot_overlaps(psi, rng)


class ExpectationEstimator:
    """<Psi|O|Psi> from grouped measurements of the prepared state alone (no ancilla)."""

    def __init__(self, groups: list[CommutingGroup], n_qubits: int,
                 measurement: Measurement = Measurement()):
        self.groups = groups
        self.n = n_qubits
        self.measurement = measurement
        self._ops = [g.operator(n_qubits).to_sparse().tocsr() for g in groups]
        self._norms = np.array([g.l2_norm() for g in groups])
        self._values: dict[int, np.ndarray] = {}

    def _group_values(self, k: int) -> np.ndarray:
        if k not in self._values:
            par = parity_array(self.n)
            b = np.arange(1 << self.n)
            vals = np.zeros(1 << self.n)
            for m in self.groups[k].members:
                vals += np.real(m.coefficient) * (1 - 2 * par[b & m.support])
            self._values[k] = vals
        return self._values[k]

    def estimate(self, psi: np.ndarray, selection: GroupSample | None, rng: np.random.Generator) -> float:
        sel = list(selection) if selection is not None else [(k, 1.0) for k in range(len(self.groups))]
        mode = self.measurement.mode
        total = 0.0
        for k, w in sel:
            if mode == "shots":
                v = apply_gates(psi.astype(complex), self.n,
                                measurement_basis_gates(self.groups[k], self.n))
                p = np.abs(v) ** 2
                counts = rng.multinomial(self.measurement.n_shots_residual, p / p.sum())
                val = counts @ self._group_values(k) / self.measurement.n_shots_residual
            else:
                val = float(np.real(np.vdot(psi, self._ops[k] @ psi)))
                if mode == "gaussian":
                    val += rng.normal(0.0, self.measurement.sigma * self._norms[k])
            total += w * val
        return float(total)


def estimate_residuals(psi: np.ndarray, estimator: ResidualEstimator, shift: float,
                       selection: GroupSample | None, rng: np.random.Generator):
    """(r_i per excitation, r_0, s_0) with r_t = g_t - S s_t."""
    g, s = estimator.estimate(psi, selection, rng)
    r = g - shift * s
    return r[1:], float(r[0]), float(s[0])
