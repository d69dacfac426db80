"""Qubitwise-commuting measurement groups and importance-sampled group selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliTerm, QubitOperator


@dataclass(frozen=True)
class CommutingGroup:
    members: tuple[PauliTerm, ...]
    is_diagonal: bool = False
    # per-qubit measurement basis shared by every member
    basis_x: int = field(default=0, compare=False)
    basis_z: int = field(default=0, compare=False)

    @property
    def weight(self) -> float:
        return float(sum(abs(t.coefficient) for t in self.members))

    @property
    def support(self) -> int:
        return self.basis_x | self.basis_z

    def __len__(self):
        return len(self.members)

    def operator(self, n_qubits: int) -> QubitOperator:
        return QubitOperator.from_terms(n_qubits, self.members)

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(abs(t.coefficient) ** 2 for t in self.members)))


def _make_group(terms: list[PauliTerm], diagonal: bool) -> CommutingGroup:
    bx = bz = 0
    for t in terms:
        bx |= t.x
        bz |= t.z
    return CommutingGroup(tuple(terms), diagonal, bx, bz)


def _first_fit(terms: list[PauliTerm]) -> list[list[PauliTerm]]:
    bins: list[list[PauliTerm]] = []
    sigs: list[list[int]] = []  # [x, z] letters fixed so far in each bin
    for t in terms:
        for b, sig in zip(bins, sigs):
            overlap = (sig[0] | sig[1]) & t.support
            if ((sig[0] ^ t.x) | (sig[1] ^ t.z)) & overlap == 0:
                b.append(t)
                sig[0] |= t.x
                sig[1] |= t.z
                break
        else:
            bins.append([t])
            sigs.append([t.x, t.z])
    return bins


def _by_xy_pattern(terms: list[PauliTerm]) -> list[list[PauliTerm]]:
    bins: dict[tuple[int, int], list[PauliTerm]] = {}
    for t in terms:
        bins.setdefault((t.x, t.z & t.x), []).append(t)
    return list(bins.values())


def group_qubitwise(h: QubitOperator, strategy: str = "xy_pattern") -> list[CommutingGroup]:
    """Partition into qubitwise-commuting groups, diagonal group first.

    ``xy_pattern`` (default) puts strings with identical X/Y letters in one
    group; they can differ only by Z letters off that pattern, so they share
    a measurement basis. ``first_fit`` scans terms by decreasing |coefficient|
    and inserts each into the first compatible group, which packs tighter.
    Off-diagonal groups are ordered by decreasing weight, ties by masks.
    """
    diag = sorted((t for t in h.pauli_terms() if t.x == 0), key=lambda t: t.z)
    rest = sorted((t for t in h.pauli_terms() if t.x != 0),
                  key=lambda t: (-abs(t.coefficient), t.x, t.z))
    if strategy == "first_fit":
        bins = _first_fit(rest)
    elif strategy == "xy_pattern":
        bins = _by_xy_pattern(rest)
    else:
        raise ValueError(f"unknown grouping strategy {strategy!r}")
    off = [_make_group(b, False) for b in bins]
    if strategy == "xy_pattern":
        off.sort(key=lambda g: (-g.weight, g.basis_x, g.basis_z))
    groups = [_make_group(diag, True)] if diag else []
    return groups + off


@dataclass(frozen=True)
class GroupSample:
    """Selected group indices and their unbiasing weights."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]

    def __iter__(self):
        return iter(zip(self.indices, self.weights))


def selection_probabilities(groups: list[CommutingGroup], mode: str = "g0") -> np.ndarray:
    """p(k) over all groups (``plain``) or p'(k) over off-diagonal groups (``g0``)."""
    w = np.array([g.weight for g in groups])
    if mode == "plain":
        return w / w.sum()
    if mode != "g0":
        raise ValueError(f"unknown selection mode {mode!r}")
    off = np.array([not g.is_diagonal for g in groups])
    p = np.where(off, w, 0.0)
    total = p.sum()
    return p / total if total > 0 else p


def sample_groups(groups: list[CommutingGroup], n_hamil: int, rng: np.random.Generator,
                  mode: str = "g0") -> GroupSample:
    """Draw ``n_hamil`` groups with replacement.

    A group drawn m times gets weight m / (n_hamil p(k)), so the weighted sum
    of group contributions is an unbiased estimate of the full operator. In
    ``g0`` mode the diagonal group is always included with weight 1.
    """
    if not groups:
        raise ValueError("no groups to sample from")
    if n_hamil < 1:
        raise ValueError("n_hamil must be >= 1")
    p = selection_probabilities(groups, mode)
    idx: list[int] = []
    wts: list[float] = []
    if mode == "g0":
        idx += [k for k, g in enumerate(groups) if g.is_diagonal]
        wts += [1.0] * len(idx)
        if p.sum() == 0:
            return GroupSample(tuple(idx), tuple(wts))
    counts = rng.multinomial(n_hamil, p)
    for k in np.nonzero(counts)[0]:
        idx.append(int(k))
        wts.append(counts[k] / (n_hamil * p[k]))
    return GroupSample(tuple(idx), tuple(wts))


def full_selection(groups: list[CommutingGroup]) -> GroupSample:
    return GroupSample(tuple(range(len(groups))), (1.0,) * len(groups))
