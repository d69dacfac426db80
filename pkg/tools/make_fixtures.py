"""Regenerate the FCIDUMP fixtures under src/mcpqe/fixtures with PySCF.

PySCF is only needed here; the package itself reads the committed files.
Usage: python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from pyscf import ao2mo, fci, gto, scf

from mcpqe.chem.fcidump import write_fcidump
from mcpqe.chem.hchain import fix_orbital_phases
from mcpqe.chem.integrals import SpinOrbitalIntegrals

OUT = Path(__file__).resolve().parents[1] / "src" / "mcpqe" / "fixtures"
BOHR = 0.52917721092
REFERENCE = Path(__file__).resolve().parents[1] / "tests" / "data" / "pyscf_reference.json"


def chain(n, r):
    return "; ".join(f"H 0 0 {k * r:.10f}" for k in range(n))


def h2o(r, angle=104.5):
    a = np.deg2rad(angle / 2)
    return (f"O 0 0 0; H 0 {r * np.sin(a):.10f} {r * np.cos(a):.10f}; "
            f"H 0 {-r * np.sin(a):.10f} {r * np.cos(a):.10f}")


def beh2(x_bohr):
    # C2v insertion path: Be at origin, H2 midpoint at x, half-separation 2.54 - 0.46 x (bohr)
    y = 2.54 - 0.46 * x_bohr
    return f"Be 0 0 0; H {x_bohr * BOHR:.10f} {y * BOHR:.10f} 0; H {x_bohr * BOHR:.10f} {-y * BOHR:.10f} 0"


SYSTEMS = {
    "h2": [("r0.7414", chain(2, 0.7414), 0, 0)],
    "h3p": [(f"r{r:.2f}", chain(3, r), 1, 0) for r in (1.5, 1.75, 2.0)],
    "h3": [(f"r{r:.2f}", chain(3, r), 0, 1) for r in (1.0, 1.5, 2.0)],
    "h4": [("r1.50", chain(4, 1.5), 0, 0)],
    "lih": [(f"r{r:.3f}", f"Li 0 0 0; H 0 0 {r}", 0, 0) for r in (1.2, 1.6, 2.2, 3.0)],
    "hf": [(f"r{r:.3f}", f"F 0 0 0; H 0 0 {r}", 0, 0) for r in (0.7, 0.917, 1.2, 1.6)],
    "h2o": [(f"r{r:.3f}", h2o(r), 0, 0) for r in (0.8, 0.958, 1.2, 1.5)],
    "beh2": [(f"x{x:.1f}", beh2(x), 0, 0) for x in (0.0, 1.5, 2.5, 3.5)],
}


def integrals(atom: str, charge: int, spin: int) -> tuple[SpinOrbitalIntegrals, float, float]:
    mol = gto.M(atom=atom, basis="sto-3g", charge=charge, spin=spin, verbose=0)
    mf = (scf.ROHF(mol) if spin else scf.RHF(mol))
    mf.conv_tol = 1e-12
    mf.run()
    if not mf.converged:
        raise RuntimeError(f"SCF not converged for {atom}")
    c = fix_orbital_phases(mf.mo_coeff)
    n = c.shape[1]
    h = c.T @ mf.get_hcore() @ c
    g = ao2mo.restore(1, ao2mo.kernel(mol, c), n)
    ints = SpinOrbitalIntegrals(n, mol.nelectron, spin, mol.energy_nuc(), 0.5 * (h + h.T), g,
                                np.asarray(mf.mo_energy))
    na, nb = mol.nelec
    e_fci = fci.direct_spin1.kernel(h, g, n, (na, nb), ecore=mol.energy_nuc(), conv_tol=1e-12)[0]
    return ints, mf.e_tot, e_fci


def main():
    ref = {}
    for name, points in SYSTEMS.items():
        (OUT / name).mkdir(parents=True, exist_ok=True)
        for tag, atom, charge, spin in points:
            ints, e_scf, e_fci = integrals(atom, charge, spin)
            write_fcidump(ints, OUT / name / f"{tag}.fcidump", tol=1e-14)
            ref[f"{name}/{tag}"] = {"e_scf": e_scf, "e_fci": e_fci}
            print(f"{name:5s} {tag:8s} E_scf={e_scf:.8f} E_fci={e_fci:.8f} corr={e_fci - e_scf:.5f}")

    REFERENCE.parent.mkdir(parents=True, exist_ok=True)
    REFERENCE.write_text(json.dumps(ref, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
