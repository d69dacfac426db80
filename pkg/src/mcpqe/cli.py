"""Experiment runner: ``mcpqe <command> --config FILE [--seed N] [--out DIR]``.

Config files are flat ``key = value`` text. Lengths carry a unit suffix
(``1.5A`` / ``1.5angstrom`` or ``2.83a0`` / ``2.83bohr``). Unknown keys are
rejected. Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import re
import sys
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .chem.fcidump import read_fcidump
from .chem.hchain import hydrogen_chain_integrals, to_bohr
from .engine.folded import run_folded_spectrum
from .engine.pqe import NotConverged, deterministic_pqe
from .engine.propagate import (
    PopulationCollapse,
    PropagationConfig,
    RunResult,
    TrialWavefunction,
    run_ground,
    trial_projected_energy,
    trajectory_csv,
)
from .engine.spawn import analytic_ptilde, kl_divergence, p_gen, restrict, sample_spawn_targets
from .engine.system import StatePreparer, System, build_system
from .oracle import SectorTooLarge
from .stats import reblock

log = logging.getLogger("mcpqe")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


# ------------------------------------------------------------------ config

SYSTEM_KEYS = {"fcidump", "chain_atoms", "chain_spacing", "chain_charge", "frozen_core", "grouping",
               "name"}
EXTRA_KEYS = {
    "mode": str,  # scan: ground | fs
    "omega": float,  # Hartree, relative to the reference energy
    "reference": str,  # comma-separated occupied spin orbitals
    "scan": str,  # lengths, a start:stop:step range, or fcidump names
    "window": float,
    "first_n_steps": int,
    "tol": float,
    "max_iter": int,
    "screen": bool,
    "trial": str,  # det:coeff pairs, dets as orbital lists joined by '.'
    "n_samples": int,
    "spawn_steps": int,
    "compare_pqe": bool,  # ground scan: errors against deterministic PQE
}
_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}
_LENGTH = re.compile(r"^\s*([-+0-9.eE]+)\s*(a|angstrom|ang|a0|bohr)\s*$", re.IGNORECASE)


def parse_length(text: str) -> float:
    """Length in bohr from a suffixed value such as ``1.5A`` or ``2.83a0``."""
    m = _LENGTH.match(text)
    if not m:
        raise ConfigError(f"length {text!r} needs a unit suffix (A, angstrom, a0, bohr)")
    return to_bohr(float(m.group(1)), m.group(2))


def parse_lengths(text: str) -> list[float]:
    """Comma list of lengths or a ``start:stop:step`` range (stop inclusive), in bohr."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, step = (parse_length(t) for t in text.split(":"))
        if step <= 0:
            raise ConfigError("scan step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(max(n, 0))]
    return [parse_length(t) for t in text.split(",") if t.strip()]


def parse_orbitals(text: str) -> int:
    try:
        occ = [int(t) for t in re.split(r"[,.\s]+", text.strip()) if t]
    except ValueError as exc:
        raise ConfigError(f"bad orbital list {text!r}") from exc
    if len(set(occ)) != len(occ) or any(p < 0 for p in occ):
        raise ConfigError(f"bad orbital list {text!r}")
    return sum(1 << p for p in occ)


def _coerce(key: str, kind, raw: str):
    try:
        if kind is bool:
            return _BOOL[raw.strip().lower()]
        return kind(raw.strip())
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from exc


_FIELD_KIND = {"float": float, "int": int, "bool": bool, "str": str,
               "float | None": float, "int | None": int}


def load_config(text: str) -> dict:
    """Parse flat key = value text; returns a dict of raw strings."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return dict(cp["experiment"])


def split_config(raw: dict) -> tuple[dict, PropagationConfig, dict]:
    """(system keys, propagation config, extra keys), rejecting unknown keys."""
    prop_fields = {f.name: f for f in fields(PropagationConfig)}
    system, prop, extra = {}, {}, {}
    for key, value in raw.items():
        if key in SYSTEM_KEYS:
            system[key] = value
        elif key in prop_fields:
            kind = _FIELD_KIND.get(str(prop_fields[key].type))
            if kind is None:
                raise ConfigError(f"{key}: unsupported field type")
            prop[key] = _coerce(key, kind, value)
        elif key in EXTRA_KEYS:
            extra[key] = value if EXTRA_KEYS[key] is str else _coerce(key, EXTRA_KEYS[key], value)
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    try:
        config = PropagationConfig(**prop)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return system, config, extra


# ------------------------------------------------------------------ systems

def resolve_fcidump(name: str) -> Path:
    """A filesystem path, or a bundled fixture such as ``h3p/r2.00``."""
    p = Path(name)
    if p.is_file():
        return p
    fixture = resources.files("mcpqe") / "fixtures" / f"{name}.fcidump"
    if fixture.is_file():
        return Path(str(fixture))
    raise ConfigError(f"no FCIDUMP file or fixture named {name!r}")


def _chain(system: dict, spacing_bohr: float):
    try:
        n = int(system["chain_atoms"])
        charge = int(system.get("chain_charge", "0"))
    except (KeyError, ValueError) as exc:
        raise ConfigError("chain_atoms (int) is required for a hydrogen chain") from exc
    try:
        return hydrogen_chain_integrals(n, spacing_bohr, charge=charge, unit="bohr")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_from_config(system: dict, point: str | float | None = None) -> System:
    """System from the config; ``point`` overrides the fcidump name or chain spacing."""
    frozen = _coerce("frozen_core", int, system.get("frozen_core", "0"))
    grouping = system.get("grouping", "xy_pattern")
    if "fcidump" in system and "chain_atoms" in system:
        raise ConfigError("give either fcidump or chain_atoms, not both")
    if "fcidump" in system or isinstance(point, str):
        name = point if isinstance(point, str) else system["fcidump"]
        ints = read_fcidump(resolve_fcidump(name))
        label = system.get("name", name)
    elif "chain_atoms" in system:
        spacing = point if point is not None else parse_length(system.get("chain_spacing", ""))
        ints = _chain(system, spacing)
        charge = int(system.get("chain_charge", "0"))
        tag = "" if charge == 0 else ("+" if charge > 0 else "-") * abs(charge)
        label = system.get("name", f"H{system['chain_atoms']}{tag} {spacing:.6f} a0")
    else:
        raise ConfigError("a system source (fcidump or chain_atoms) is required")
    try:
        return build_system(ints, frozen, grouping, label)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def scan_errors(errors) -> tuple[float, float]:
    """Maximum absolute error and non-parallelity error (max minus min) of a curve."""
    e = np.asarray(errors, dtype=float)
    return float(np.abs(e).max()), float(e.max() - e.min())


def scan_points(system: dict, extra: dict) -> list:
    text = extra.get("scan", "")
    if "chain_atoms" in system:
        return parse_lengths(text)
    return [t.strip() for t in text.split(",") if t.strip()]


# ------------------------------------------------------------------ output

def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _fci_or_nan(system: System) -> float:
    try:
        return system.fci_correlation
    except SectorTooLarge:
        return float("nan")


def run_summary(system: System, result: RunResult) -> dict:
    cfg = result.config
    n_param = len(result.final)
    n_groups_step = result.series("n_groups")
    doc = {
        "system": system.name,
        "e_ref": system.e_ref,
        "n_qubits": system.n_qubits,
        "n_param": n_param,
        "n_groups": len(system.groups),
        "n_steps": cfg.n_steps,
        "noise": cfg.noise,
        "fci_correlation": _fci_or_nan(system),
        "n_flagged": result.n_flagged,
        # (n_param + 1) n_iter n_hamil n_shots
        "shot_accounting": {
            "n_param_plus_1": n_param + 1,
            "n_iter": cfg.n_steps,
            "mean_groups_per_step": float(n_groups_step.mean()),
            "n_shots": cfg.n_shots_residual if cfg.noise == "shots" else 0,
            "total": result.n_measurements,
        },
    }
    for key, stats in (("shift", result.shift_stats), ("e_proj", result.energy_stats)):
        doc[key] = None if stats is None else {"mean": stats.mean, "stderr": stats.stderr,
                                               "block_size": stats.levels[stats.chosen].block_size}
    return doc


def _summary_line(doc: dict) -> str:
    def fmt(v):
        return "nan" if v is None else f"{v['mean']:.6f} +- {v['stderr']:.6f}"
    return (f"{doc['system']}: S = {fmt(doc['shift'])}  E_proj = {fmt(doc['e_proj'])}  "
            f"FCI = {doc['fci_correlation']:.6f}  flagged = {doc['n_flagged']}  "
            f"measurements = {doc['shot_accounting']['total']}")


def _parse_trial(text: str) -> TrialWavefunction:
    dets, coeffs = [], []
    for item in text.split(","):
        det, _, c = item.partition(":")
        if not c:
            raise ConfigError(f"trial entry {item!r} must be orbitals:coefficient")
        dets.append(parse_orbitals(det))
        coeffs.append(_coerce("trial", float, c))
    try:
        return TrialWavefunction.normalized(dets, coeffs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------ commands

def cmd_run(system_cfg, config, extra, out: Path) -> int:
    system = build_from_config(system_cfg)
    ansatz = system.ansatz(screen=extra.get("screen", True))
    result = run_ground(config, system, ansatz)
    _write(out, "trajectory.csv", trajectory_csv(result))
    for key, stats in (("shift", result.shift_stats), ("e_proj", result.energy_stats)):
        if stats is not None:
            _write(out, f"reblock_{key}.csv", stats.to_csv())
    doc = run_summary(system, result)
    if "trial" in extra:
        trial = _parse_trial(extra["trial"])
        targets = [ansatz.reference] + ansatz.targets
        try:
            values, flagged = trial_projected_energy(result.records, targets, trial, config.s0_floor)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        values = values[result.discard:] - system.e_ref
        stats = reblock(values[np.isfinite(values)])
        doc["e_trial"] = {"mean": stats.mean, "stderr": stats.stderr, "n_flagged": int(flagged.sum())}
    _write(out, "summary.json", _json(doc))
    print(_summary_line(doc))
    return EXIT_OK


def _reference(system: System, extra: dict) -> int | None:
    return parse_orbitals(extra["reference"]) if "reference" in extra else None


def _fs_summary(system: System, res) -> dict:
    return {
        "system": system.name,
        "e_ref": system.e_ref,
        "omega": res.omega,
        "reference": res.reference,
        "folded": res.folded,
        "energy": res.energy,
        "energy_h": res.energy_h,
        "energy_h_stderr": res.energy_h_error,
        "energy_h_final": float(res.run.records[-1].extra["e_h"]),
        "n_flagged": res.run.n_flagged,
        "switched": res.switched,
        "measurements": res.run.n_measurements,
    }


def cmd_fs(system_cfg, config, extra, out: Path) -> int:
    if "omega" not in extra:
        raise ConfigError("fs requires omega (Hartree, relative to the reference energy)")
    system = build_from_config(system_cfg)
    res = run_folded_spectrum(config, system, extra["omega"], _reference(system, extra))
    _write(out, "trajectory.csv", trajectory_csv(res.run))
    doc = _fs_summary(system, res)
    _write(out, "summary.json", _json(doc))
    print(f"{system.name}: omega = {res.omega:.6f}  E = {res.energy:.6f}  "
          f"<H> = {res.energy_h:.6f} +- {res.energy_h_error:.6f}")
    return EXIT_OK


def cmd_pqe(system_cfg, config, extra, out: Path) -> int:
    system = build_from_config(system_cfg)
    ansatz = system.ansatz(_reference(system, extra), screen=extra.get("screen", True))
    res = deterministic_pqe(ansatz, system.hamiltonian, tol=extra.get("tol", 1e-8),
                            max_iter=extra.get("max_iter", 500), check=True)
    doc = {"system": system.name, "e_ref": system.e_ref, "energy": res.energy - system.e_ref,
           "fci_correlation": _fci_or_nan(system), "iterations": res.n_iterations,
           "residual_norm": res.residual_norm, "n_param": len(res.state)}
    _write(out, "summary.json", _json(doc))
    _write(out, "ansatz.txt", res.state.dump())
    print(f"{system.name}: E_PQE = {doc['energy']:.10f}  FCI = {doc['fci_correlation']:.10f}  "
          f"iterations = {res.n_iterations}")
    return EXIT_OK


def cmd_scan(system_cfg, config, extra, out: Path) -> int:
    mode = extra.get("mode", "ground")
    if mode not in ("ground", "fs"):
        raise ConfigError(f"scan mode must be ground or fs, got {mode!r}")
    if mode == "fs" and "omega" not in extra:
        raise ConfigError("fs scan requires omega for the first point")
    points = scan_points(system_cfg, extra)
    window = extra.get("window", 0.05)
    first_n = extra.get("first_n_steps")
    rows = []
    prev_final, prev_abs = None, None
    for k, point in enumerate(points):
        system = build_from_config(system_cfg, point)
        cfg = replace(config, seed=config.seed + k)
        if k == 0 and first_n:
            cfg = replace(cfg, n_steps=first_n)
        row = {"point": k, "geometry": point, "e_ref": system.e_ref,
               "fci_correlation": _fci_or_nan(system)}
        try:
            if mode == "ground":
                ansatz = system.ansatz()
                if prev_final is not None and len(prev_final) == len(ansatz):
                    ansatz = ansatz.with_amplitudes(prev_final.amplitudes)
                res = run_ground(cfg, system, ansatz)
                for key, st in (("shift", res.shift_stats), ("e_proj", res.energy_stats)):
                    row[key] = st.mean if st else float("nan")
                    row[key + "_stderr"] = st.stderr if st else float("nan")
                row["n_flagged"] = res.n_flagged
                if extra.get("compare_pqe"):
                    det = deterministic_pqe(system.ansatz(), system.hamiltonian,
                                            tol=extra.get("tol", 1e-8),
                                            max_iter=extra.get("max_iter", 500))
                    row["e_pqe"] = det.energy - system.e_ref
                prev_final = res.final
            else:
                omega = extra["omega"] if prev_abs is None else prev_abs - system.e_ref
                res = run_folded_spectrum(cfg, system, omega, _reference(system, extra),
                                          warm_start=prev_final)
                e_abs = res.energy_h + system.e_ref
                row.update(omega=omega, energy=res.energy, energy_h=res.energy_h,
                           energy_h_stderr=res.energy_h_error,
                           switched=prev_abs is not None and abs(e_abs - prev_abs) > window)
                prev_final, prev_abs = res.final, e_abs
            row["status"] = "ok"
        except (PopulationCollapse, ArithmeticError, FloatingPointError) as exc:
            log.warning("point %d failed: %s", k, exc)
            row["status"] = f"failed: {exc}"
        rows.append(row)
    columns = sorted({c for r in rows for c in r}, key=lambda c: (c != "point", c))
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in r.items()})
    _write(out, "scan.csv", buf.getvalue())
    print(f"scan: {len(rows)} points, {sum(r['status'] == 'ok' for r in rows)} ok")
    errors = [r["e_proj"] - r["e_pqe"] for r in rows if r["status"] == "ok" and "e_pqe" in r]
    if errors:
        mae, npe = scan_errors(errors)
        _write(out, "errors.json", _json({"mae": mae, "npe": npe, "n_points": len(errors)}))
        print(f"vs deterministic PQE: MAE = {1e3 * mae:.3f} mHa  NPE = {1e3 * npe:.3f} mHa")
    return EXIT_OK


def cmd_groups(system_cfg, config, extra, out: Path) -> int:
    system = build_from_config(system_cfg)
    groups = system.groups
    total = sum(g.weight for g in groups)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "n_terms", "weight", "l2_norm", "diagonal"])
    for k, g in enumerate(groups):
        w.writerow([k, len(g), repr(g.weight), repr(g.l2_norm()), int(g.is_diagonal)])
    _write(out, "groups.csv", buf.getvalue())
    g0 = sum(g.weight for g in groups if g.is_diagonal)
    print(f"{system.name}: {len(groups)} groups, {len(system.hamiltonian)} Pauli terms, "
          f"G_0 weight share {g0 / total:.4f}")
    return EXIT_OK


def cmd_fci(system_cfg, config, extra, out: Path) -> int:
    system = build_from_config(system_cfg)
    try:
        energies = system.fci[0]
    except SectorTooLarge as exc:
        raise ConfigError(str(exc)) from exc
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "energy", "correlation"])
    for k, e in enumerate(energies):
        w.writerow([k, repr(float(e)), repr(float(e - system.e_ref))])
    _write(out, "fci.csv", buf.getvalue())
    print(f"{system.name}: E_ref = {system.e_ref:.10f}  E_FCI = {energies[0]:.10f}  "
          f"correlation = {energies[0] - system.e_ref:.10f}")
    return EXIT_OK


def cmd_spawn(system_cfg, config, extra, out: Path) -> int:
    """Generation-probability study on an approximate ground state from deterministic PQE."""
    system = build_from_config(system_cfg)
    ansatz = system.ansatz()
    res = deterministic_pqe(ansatz, system.hamiltonian, max_iter=extra.get("max_iter", 500))
    psi = StatePreparer(res.state)(res.state.amplitudes)
    dets = np.array(system.basis.determinants)
    c = psi[dets]
    shift = float(c @ system.sector_matrix @ c)
    pg = p_gen(system.sector_matrix, c, shift)
    pt = analytic_ptilde(psi, system.fermion, system.basis)
    support = pg > 1e-12
    uniform = np.ones_like(pg)
    rng = np.random.default_rng(config.seed)
    sample = sample_spawn_targets(psi, system.fermion, system.basis, extra.get("n_samples", 100000), rng)
    pos = {int(d): k for k, d in enumerate(dets)}
    hist = np.bincount([pos[int(d)] for d in sample.determinants], minlength=dets.size)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["determinant", "p_gen", "p_tilde", "sampled"])
    for k, d in enumerate(dets):
        w.writerow([int(d), repr(float(pg[k])), repr(float(pt[k])), int(hist[k])])
    _write(out, "spawn.csv", buf.getvalue())
    doc = {"kl_ptilde": kl_divergence(restrict(pt, support), restrict(pg, support)),
           "kl_uniform": kl_divergence(restrict(uniform, support), restrict(pg, support)),
           "n_rejected": sample.n_rejected, "n_accepted": int(hist.sum())}
    _write(out, "summary.json", _json(doc))
    print(f"{system.name}: KL(p~||p_gen) = {doc['kl_ptilde']:.4f}  "
          f"KL(uniform||p_gen) = {doc['kl_uniform']:.4f}")
    return EXIT_OK


def cmd_reblock(args) -> int:
    try:
        with open(args.file, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    if not rows or args.column not in rows[0]:
        raise ConfigError(f"column {args.column!r} not found in {args.file}")
    x = np.array([float(r[args.column]) for r in rows])
    x = x[args.discard:]
    x = x[np.isfinite(x)]
    try:
        res = reblock(x)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.out:
        _write(Path(args.out), f"reblock_{args.column}.csv", res.to_csv())
    sys.stdout.write(res.to_csv())
    print(f"# mean = {res.mean:.8f}  stderr = {res.stderr:.8f}  naive = {res.naive_stderr:.8f}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "scan": cmd_scan, "fs": cmd_fs, "pqe": cmd_pqe,
            "groups": cmd_groups, "fci": cmd_fci, "spawn": cmd_spawn}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcpqe", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value experiment file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="config entries overriding the file")
    p = sub.add_parser("reblock")
    p.add_argument("file", help="CSV file, e.g. trajectory.csv")
    p.add_argument("--column", default="shift")
    p.add_argument("--discard", type=int, default=0)
    p.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "reblock":
            return cmd_reblock(args)
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        raw = load_config(text)
        for item in args.overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            raw[key.strip()] = value.strip()
        if args.seed is not None:
            raw["seed"] = str(args.seed)
        system_cfg, config, extra = split_config(raw)
        return COMMANDS[args.command](system_cfg, config, extra, Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (PopulationCollapse, ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
