"""Acceptance suite: the ten end-to-end criteria at their stated tolerances.

Each ``criterion_N`` returns ``(passed, detail)``; the pytest wrappers record
one PASS/FAIL line per criterion (printed in the terminal summary) and then
assert. ``python tests/test_acceptance.py [N ...]`` runs them without pytest.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.stats import chisquare

sys.path.insert(0, str(Path(__file__).resolve().parent))
from conftest import ACCEPTANCE_LINES, all_fixture_names, fixture_path  # noqa: E402

from mcpqe.chem.fcidump import read_fcidump  # noqa: E402
from mcpqe.chem.hchain import hydrogen_chain_integrals  # noqa: E402
from mcpqe.engine.folded import folded_scan, run_folded_spectrum  # noqa: E402
from mcpqe.engine.pqe import deterministic_pqe  # noqa: E402
from mcpqe.engine.propagate import PropagationConfig, run_ground  # noqa: E402
from mcpqe.engine.residuals import ResidualEstimator  # noqa: E402
from mcpqe.engine.spawn import (analytic_ptilde, kl_divergence, p_gen, restrict,  # noqa: E402
                                sample_spawn_targets)
from mcpqe.engine.system import StatePreparer, build_system  # noqa: E402
from mcpqe.oracle import DeterminantBasis, build_sector_hamiltonian, qubit_sector_matrix  # noqa: E402
from mcpqe.qubit.grouping import sample_groups  # noqa: E402
from mcpqe.stats import reblock  # noqa: E402

_SYSTEMS: dict = {}

# H3+ reference determinants |01>, |03>, |12>, |23>, |05>, |14>, |25>, |34>, |45> as bitmasks
LADDER_REFERENCES = [3, 9, 6, 12, 33, 18, 36, 24, 48]


def system(name: str, frozen_core: int = 0):
    key = (name, frozen_core)
    if key not in _SYSTEMS:
        _SYSTEMS[key] = build_system(read_fcidump(fixture_path(name)), frozen_core, name=name)
    return _SYSTEMS[key]


def _mha(x: float) -> str:
    return f"{1e3 * x:.3f} mHa"


# ----------------------------------------------------------------- criteria

def criterion_1():
    """Deterministic PQE and exact-mode MC-PQE reach FCI within 1e-6 for 2-electron systems."""
    worst, parts = 0.0, []
    for name in ("h2/r0.7414", "h3p/r1.50", "h3p/r1.75", "h3p/r2.00"):
        s = system(name)
        e_fci = s.fci_correlation
        pqe = deterministic_pqe(s.ansatz(), s.hamiltonian, tol=1e-10, check=True)
        run = run_ground(PropagationConfig(n_steps=2000), s)
        errs = [abs(pqe.energy - s.e_ref - e_fci), abs(run.shift_stats.mean - e_fci),
                abs(run.energy_stats.mean - e_fci)]
        worst = max(worst, *errs)
        parts.append(f"{name} {max(errs):.1e}")
    return worst < 1e-6, f"max |E - E_FCI| = {worst:.2e} Ha ({', '.join(parts)})"


def _shot_run(n_shots: int, seed: int):
    s = system("h3p/r2.00")
    cfg = PropagationConfig(noise="shots", n_shots_residual=n_shots, n_shots_reference=n_shots,
                            seed=seed)
    return run_ground(cfg, s)


def criterion_2():
    """H3+ at 2.0 A with 1000 shots: S and E within 3 combined sigma of FCI; 10^4 shots shrink sigma."""
    target, ref_sigma_s, ref_sigma_e = -0.11586, 0.0009, 0.001
    r3 = _shot_run(1000, seed=1)
    r4 = _shot_run(10000, seed=1)
    S, E = r3.shift_stats, r3.energy_stats
    tol_s = 3 * np.hypot(S.stderr, ref_sigma_s)
    tol_e = 3 * np.hypot(E.stderr, ref_sigma_e)
    ratio = S.stderr / r4.shift_stats.stderr
    ok = (abs(S.mean - target) < tol_s and abs(E.mean - target) < tol_e
          and ref_sigma_s / 3 <= S.stderr <= 3 * ref_sigma_s and 2 <= ratio <= 5)
    return ok, (f"<S> = {S.mean:.5f} +- {S.stderr:.5f}, <E> = {E.mean:.5f} +- {E.stderr:.5f}, "
                f"sigma(S) 1e3/1e4 ratio = {ratio:.2f}")


def criterion_3():
    """Stochastic rounding at 1.5 A: H3+ and H3 shift within 3 sigma of FCI; H4 E_proj biased by ~10 mHa."""
    parts, ok = [], True
    for name in ("h3p/r1.50", "h3/r1.50"):
        s = system(name)
        run = run_ground(PropagationConfig(rounding=True, seed=2), s)
        S, E = run.shift_stats, run.energy_stats
        f = s.fci_correlation
        ok &= abs(S.mean - f) < 3 * S.stderr
        parts.append(f"{name.split('/')[0]} S-FCI {(S.mean - f) / S.stderr:+.1f} sigma "
                     f"(E_proj {(E.mean - f) / E.stderr:+.1f} sigma)")
    s = system("h4/r1.50")
    run = run_ground(PropagationConfig(rounding=True, seed=2), s)
    bias = run.energy_stats.mean - s.fci_correlation
    # correlation overestimated (E below FCI), magnitude of order 10 mHa
    ok &= -0.030 <= bias <= -0.003
    parts.append(f"h4 E_proj - FCI = {_mha(bias)}")
    return bool(ok), "; ".join(parts)


def criterion_4():
    """Sampled-Hamiltonian residuals are unbiased; n_hamil = 2..6 runs bracket FCI within 3 sigma."""
    s = system("h3p/r2.00")
    pqe = deterministic_pqe(s.ansatz(), s.hamiltonian)
    a = pqe.state
    psi = StatePreparer(a)(0.7 * a.amplitudes)
    est = ResidualEstimator(s.groups, s.n_qubits, [a.reference] + a.targets)
    full, _ = est.exact(psi)
    rng = np.random.default_rng(0)
    n_off = sum(not g.is_diagonal for g in s.groups)

    def draws(n_hamil, n=10_000):
        return np.array([est.exact(psi, sample_groups(s.groups, n_hamil, rng))[0] for _ in range(n)])

    x = draws(n_off)
    rel = float(np.abs(x.mean(0) / full - 1).max())
    z_small = max(float(np.abs((y.mean(0) - full) / (y.std(0) / np.sqrt(len(y)))).max())
                  for y in (draws(k) for k in range(2, 7)))
    f = s.fci_correlation
    zs = []
    for k in range(2, 7):
        run = run_ground(PropagationConfig(n_hamil=k, seed=4), s)
        for st in (run.shift_stats, run.energy_stats):
            zs.append(abs(st.mean - f) / st.stderr)
    ok = rel < 0.01 and max(zs) < 3
    return ok, (f"n_hamil={n_off}: max rel dev {100 * rel:.2f}% (n_hamil 2-6 max |z| {z_small:.1f}); "
                f"runs n_hamil 2-6 max |<X> - FCI| / sigma = {max(zs):.2f}")


def criterion_5():
    """Shift damping zeta = 0.1 cuts shift fluctuations but leaves E_proj fluctuations alone."""
    s = system("h3p/r1.75")
    out = []
    for n_shots in (100, 1000):
        sd = {}
        for zeta in (1.0, 0.1):
            cfg = PropagationConfig(noise="shots", n_shots_residual=n_shots,
                                    n_shots_reference=n_shots, zeta=zeta, seed=10)
            run = run_ground(cfg, s)
            d = run.discard
            e = run.series("e_proj")[d:]
            sd[zeta] = (run.series("shift")[d:].std(), e[np.isfinite(e)].std())
        out.append((n_shots, sd[0.1][0] / sd[1.0][0], sd[0.1][1] / sd[1.0][1]))
    ok = all(rs < 0.5 and 0.8 <= re <= 1.2 for _, rs, re in out)
    return ok, "; ".join(f"{n} shots: sigma(S) ratio {rs:.2f}, sigma(E) ratio {re:.2f}"
                         for n, rs, re in out)


def ladder_assignment(s) -> list[tuple[int, int]]:
    """(reference, eigenstate) pairs maximizing total reference weight in the eigenvectors."""
    dets = list(s.basis.determinants)
    w = np.abs(s.fci[1]) ** 2
    rows = [dets.index(r) for r in LADDER_REFERENCES]
    r_i, c_i = linear_sum_assignment(-w[rows, :])
    return [(LADDER_REFERENCES[r], int(c)) for r, c in zip(r_i, c_i)]


def criterion_6():
    """Folded spectrum: exact 9-state H3+ ladder within 1e-5; noisy scan within 5 mHa of FCI."""
    s = system("h3p/r1.50")
    ev = s.fci[0] - s.e_ref
    exact_dev = 0.0
    for ref, k in ladder_assignment(s):
        res = run_folded_spectrum(PropagationConfig(n_steps=6000, delta_beta=1.0), s,
                                  ev[k] + 0.001, ref)
        exact_dev = max(exact_dev, abs(res.run.series("e_h")[-1] - ev[k]))
    rs = np.arange(1.5, 2.0 + 1e-9, 0.1)
    chain = [build_system(hydrogen_chain_integrals(3, r, charge=1)) for r in rs]
    c0 = chain[0]
    ev0 = c0.fci[0] - c0.e_ref
    cfg = PropagationConfig(n_steps=3000, delta_beta=0.02, noise="gaussian", sigma=0.01,
                            n_hamil=10, seed=5)
    noisy_dev, switched = 0.0, 0
    for ref, k in ladder_assignment(c0):
        scan = folded_scan(cfg, chain, ev0[k] + 0.001, ref, window=0.2, first_n_steps=30000)
        for res, sy in zip(scan, chain):
            noisy_dev = max(noisy_dev, abs(res.energy_h - (sy.fci[0][k] - sy.e_ref)))
            switched += res.switched
    ok = exact_dev < 1e-5 and noisy_dev < 5e-3
    return ok, (f"exact ladder max dev {exact_dev:.1e} Ha; sigma=0.01, n_hamil=10 scan "
                f"1.5-2.0 A max dev {_mha(noisy_dev)}, {switched} switch flags")


def criterion_7():
    """Frozen-core hydride group census: LiH/HF 125, H2O/BeH2 313."""
    expected = {"lih": 125, "hf": 125, "h2o": 313, "beh2": 313}
    counts, ok = {}, True
    for name in all_fixture_names():
        mol = name.split("/")[0]
        if mol not in expected:
            continue
        n = len(system(name, frozen_core=1).groups)
        counts[name] = n
        # the linear BeH2 point has extra spatial symmetry that zeroes whole integral classes
        if name != "beh2/x0.0":
            ok &= n == expected[mol]
    detail = ", ".join(f"{k} {v}" for k, v in counts.items())
    return bool(ok), detail


def criterion_8():
    """Spawn sampler on the H4 near-ground state: KL ordering and histogram vs analytic p~."""
    s = system("h4/r1.50")
    pqe = deterministic_pqe(s.ansatz(), s.hamiltonian)
    psi = StatePreparer(pqe.state)(pqe.state.amplitudes)
    dets = np.array(s.basis.determinants)
    c = psi[dets]
    pg = p_gen(s.sector_matrix, c, float(c @ s.sector_matrix @ c))
    pt = analytic_ptilde(psi, s.fermion, s.basis)
    support = pg > 1e-12
    kl_t = kl_divergence(restrict(pt, support), restrict(pg, support))
    kl_u = kl_divergence(restrict(np.ones_like(pg), support), restrict(pg, support))
    sample = sample_spawn_targets(psi, s.fermion, s.basis, 100_000, np.random.default_rng(6))
    pos = {int(d): k for k, d in enumerate(dets)}
    hist = np.bincount([pos[int(d)] for d in sample.determinants], minlength=dets.size)
    m = pt > 0
    pval = chisquare(hist[m], pt[m] * hist.sum()).pvalue
    ok = kl_t < kl_u and pval > 0.01
    return ok, f"KL(p~||p_gen) = {kl_t:.3f}, KL(uniform||p_gen) = {kl_u:.3f}, chi-square p = {pval:.3f}"


def criterion_9():
    """Slater-Condon sector matrix equals the JW sector matrix for every fixture."""
    worst, n = 0.0, 0
    for name in all_fixture_names():
        hydride = name.split("/")[0] in ("lih", "hf", "h2o", "beh2")
        for frozen in (0, 1) if hydride else (0,):
            s = system(name, frozen)
            basis = DeterminantBasis.from_integrals(s.ints)
            sc = build_sector_hamiltonian(s.ints, basis)
            jw = qubit_sector_matrix(s.hamiltonian, basis)
            worst = max(worst, float(np.abs(sc - jw).max()))
            n += 1
    return worst < 1e-10, f"{n} systems, max |H_SC - H_JW| = {worst:.1e}"


def criterion_10():
    """Reblocking: sigma/sqrt(N) on white noise, sqrt((1+rho)/(1-rho)) inflation on AR(1)."""
    n, rho = 1 << 18, 0.9
    rng = np.random.default_rng(10)
    white = rng.normal(size=n)
    w = reblock(white)
    white_ratio = w.stderr / (1.0 / np.sqrt(n))
    eps = rng.normal(size=n) * np.sqrt(1 - rho ** 2)
    ar = np.empty(n)
    ar[0] = rng.normal()
    for i in range(1, n):
        ar[i] = rho * ar[i - 1] + eps[i]
    a = reblock(ar)
    expected = np.sqrt((1 + rho) / (1 - rho)) / np.sqrt(n)
    ar_ratio = a.stderr / expected
    ok = abs(white_ratio - 1) < 0.2 and abs(ar_ratio - 1) < 0.2
    return ok, f"white noise stderr / (1/sqrt N) = {white_ratio:.3f}; AR(1) stderr / expected = {ar_ratio:.3f}"


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 11)}
SLOW = {2, 3, 4, 5, 6, 8}


def evaluate(k: int) -> tuple[bool, str]:
    t = time.time()
    ok, detail = CRITERIA[k]()
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.time() - t:.0f}s]"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("k", [pytest.param(k, marks=pytest.mark.slow) if k in SLOW else k
                               for k in CRITERIA])
def test_criterion(k):
    ok, line = evaluate(k)
    assert ok, line


if __name__ == "__main__":
    chosen = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    results = [evaluate(k)[0] for k in chosen]
    sys.exit(0 if all(results) else 1)
