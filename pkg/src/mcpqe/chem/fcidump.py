"""Reader and writer for the FCIDUMP integral exchange format.

Integral lines are ``value i j k l`` with 1-based spatial orbital indices:

* ``i j k l`` all nonzero: two-electron integral (ij|kl), chemists' notation;
* ``i j 0 0``: one-electron integral h_ij;
* ``i 0 0 0``: orbital energy of orbital i;
* ``0 0 0 0``: core (nuclear repulsion plus frozen) energy.
"""

from __future__ import annotations

import io
import re
from itertools import product
from pathlib import Path
from typing import TextIO

import numpy as np

from .integrals import SpinOrbitalIntegrals


class FCIDumpError(ValueError):
    """Malformed FCIDUMP input; ``lineno`` is 1-based (0 for the header as a whole)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


_HEADER_END = re.compile(r"(&END|/)\s*$", re.IGNORECASE)


def _header_int(header: str, key: str, required: bool = True, default: int = 0) -> int:
    m = re.search(rf"\b{key}\s*=\s*(-?\d+)", header, re.IGNORECASE)
    if m is None:
        if required:
            raise FCIDumpError(f"header is missing {key}")
        return default
    return int(m.group(1))


def permutations8(i: int, j: int, k: int, l: int) -> set[tuple[int, int, int, int]]:
    """The index tuples equal to (ij|kl) under the real 8-fold symmetry."""
    return {
        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
    }


def parse_fcidump(text: str | TextIO) -> SpinOrbitalIntegrals:
    if isinstance(text, str):
        stream: TextIO = io.StringIO(text)
    else:
        stream = text
    lines = stream.read().splitlines()

    header_parts = []
    body_start = None
    for n, line in enumerate(lines):
        header_parts.append(line)
        if _HEADER_END.search(line.strip()):
            body_start = n + 1
            break
    if body_start is None:
        raise FCIDumpError("no end of namelist header (&END or /)")
    header = " ".join(header_parts)
    if "&FCI" not in header.upper():
        raise FCIDumpError("header does not start an &FCI namelist", 1)
    norb = _header_int(header, "NORB")
    nelec = _header_int(header, "NELEC")
    ms2 = _header_int(header, "MS2", required=False)
    if norb <= 0:
        raise FCIDumpError(f"NORB must be positive, got {norb}")

    h1 = np.zeros((norb, norb))
    h2 = np.zeros((norb, norb, norb, norb))
    eps = np.zeros(norb)
    have_eps = False
    core = 0.0
    for n in range(body_start, len(lines)):
        lineno = n + 1
        fields = lines[n].split()
        if not fields:
            continue
        if len(fields) != 5:
            raise FCIDumpError(f"expected 'value i j k l', got {lines[n]!r}", lineno)
        try:
            value = float(fields[0].replace("D", "E").replace("d", "e"))
        except ValueError:
            raise FCIDumpError(f"non-numeric integral value {fields[0]!r}", lineno) from None
        try:
            i, j, k, l = (int(f) for f in fields[1:])
        except ValueError:
            raise FCIDumpError(f"non-integer index in {lines[n]!r}", lineno) from None
        if any(x < 0 or x > norb for x in (i, j, k, l)):
            raise FCIDumpError(f"index out of range [0, {norb}] in {lines[n]!r}", lineno)
        if i and j and k and l:
            for p, q, r, s in permutations8(i - 1, j - 1, k - 1, l - 1):
                h2[p, q, r, s] = value
        elif i and j and not k and not l:
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = value
        elif i and not j and not k and not l:
            eps[i - 1] = value
            have_eps = True
        elif not (i or j or k or l):
            core = value
        else:
            raise FCIDumpError(f"unrecognised index pattern {i} {j} {k} {l}", lineno)

    try:
        return SpinOrbitalIntegrals(
            n_spatial=norb,
            n_electrons=nelec,
            ms2=ms2,
            core_energy=core,
            one_body=h1,
            two_body=h2,
            orbital_energies=eps if have_eps else None,
        )
    except ValueError as exc:
        raise FCIDumpError(str(exc)) from None


def read_fcidump(path: str | Path) -> SpinOrbitalIntegrals:
    with open(path) as fh:
        return parse_fcidump(fh)


def format_fcidump(ints: SpinOrbitalIntegrals, tol: float = 0.0) -> str:
    """Serialise with one line per permutation class (canonical i>=j, k>=l, ij>=kl).

    Values are written with ``repr`` so a re-parse is bit-identical.
    """
    n = ints.n_spatial
    out = [
        f"&FCI NORB={n},NELEC={ints.n_electrons},MS2={ints.ms2},",
        "  ORBSYM=" + "1," * n,
        "  ISYM=1,",
        "&END",
    ]
    g = ints.two_body
    for i, j, k, l in product(range(n), repeat=4):
        if i < j or k < l or i * (i + 1) // 2 + j < k * (k + 1) // 2 + l:
            continue
        v = g[i, j, k, l]
        if abs(v) > tol:
            out.append(f"{float(v)!r} {i + 1} {j + 1} {k + 1} {l + 1}")
    for i in range(n):
        for j in range(i + 1):
            v = ints.one_body[i, j]
            if abs(v) > tol:
                out.append(f"{float(v)!r} {i + 1} {j + 1} 0 0")
    if ints.orbital_energies is not None:
        for i, e in enumerate(ints.orbital_energies):
            out.append(f"{float(e)!r} {i + 1} 0 0 0")
    out.append(f"{float(ints.core_energy)!r} 0 0 0 0")
    return "\n".join(out) + "\n"


def write_fcidump(ints: SpinOrbitalIntegrals, path: str | Path, tol: float = 0.0) -> None:
    Path(path).write_text(format_fcidump(ints, tol))
