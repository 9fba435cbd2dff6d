"""Command-line front end.

    ncqm check     --spec MODEL.json --ham HAM.json [--checks all|a,b] [--out DIR]
    ncqm decompose COEFFS.json|COEFFS.csv (--theta T | --lambda RE,IM) [--out FILE]
    ncqm evolve    --spec MODEL.json --ham HAM.json --observable LABEL --times 0,0.5,1 [--out FILE]
    ncqm distance  --spec MODEL.json DISTANCE.json [--ham HAM.json] [--out FILE]

Exit status is 0 when every requested check passes, 1 when one fails and
2 on any input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import axioms
from .algebra import PreconditionError, check_scalarity
from .derivations import (DerivationCoeffs, DerivationInputError, ResonanceError, check_diophantine,
                          decompose_derivation)
from .distance import DistanceInputError, StateSpec, connes_distance
from .dynamics import (AssemblyError, Evolution, HamiltonianSpec, assemble_hamiltonian,
                       dirac_identity_residuals, dirac_operator, lemma_Tdot, moyal_consistency, parse_matrix)
from .models import MoyalBundle, ModelInputError, ModelSpec, build_model, nc_torus_lambda, parse_theta, relation_residuals
from .numerics import NumericsInputError, hs_norm
from .report import CheckReport

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
INPUT_ERRORS = (ModelInputError, DerivationInputError, DistanceInputError, AssemblyError,
                NumericsInputError, PreconditionError)


class InputError(Exception):
    """Reported on stderr; the process exits with status 2."""


def load_json(path: str):
    if not os.path.exists(path):
        raise InputError(f"{path}: no such file")
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


@dataclass
class RunManifest:
    spec_path: str
    ham_path: str | None
    checks: list[str]
    seed: int
    tol: float | None
    out: str | None
    window_margin: int | None = None
    jobs: int = 1

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")
        for p in (self.spec_path, self.ham_path):
            if p is not None and not os.path.exists(p):
                raise InputError(f"{p}: no such file")

    def model(self):
        spec = ModelSpec.from_dict(load_json(self.spec_path))
        if self.window_margin is not None:
            spec.window_margin = self.window_margin
        return build_model(spec)

    def hamiltonian(self, bundle):
        if self.ham_path is None:
            raise InputError("--ham is required")
        hspec = HamiltonianSpec.from_dict(load_json(self.ham_path))
        return hspec, assemble_hamiltonian(bundle, hspec)


# ---------------------------------------------------------------------------
# check registry


def _dict_report(name, bundle, values: dict, tol, notes=()):
    return CheckReport(name, bundle.label, list(values.items()), tol, bundle.window_params(), list(notes))


def _relations(bundle, H, hspec, tol, seed):
    return _dict_report("relations", bundle, relation_residuals(bundle), tol if tol is not None else 1e-10)


def _scalarity(bundle, H, hspec, tol, seed):
    rep = check_scalarity(bundle.rep, tol if tol is not None else 1e-8)
    return CheckReport("scalarity", bundle.label, [("span(JAJ^-1) vs A'", rep.residual)],
                       tol if tol is not None else 1e-8, bundle.window_params(),
                       [f"dimensions {rep.dimension_a} and {rep.dimension_b}"])


def _weak(bundle, H, hspec, tol, seed):
    return axioms.check_weak_uncertainty(bundle, H, tol or axioms.DEFAULT_TOL, seed=seed)


def _strong(bundle, H, hspec, tol, seed):
    return axioms.check_strong_uncertainty(bundle, H, tol or axioms.DEFAULT_TOL, seed=seed)


def _equivalence(bundle, H, hspec, tol, seed):
    return axioms.check_weak_strong_equivalence(bundle, 20, seed, tol or axioms.DEFAULT_TOL)


def _positivity(bundle, H, hspec, tol, seed):
    return axioms.check_positivity_nontriviality(bundle, H, seed=seed, tol=tol or 1e-9)


def _reality(bundle, H, hspec, tol, seed):
    return axioms.check_reality(bundle, H, tol or axioms.DEFAULT_TOL, seed=seed)


def _moyal(bundle, H, hspec, tol, seed):
    return moyal_consistency(bundle, H, tol or 1e-9)


def _lemma(bundle, H, hspec, tol, seed):
    return lemma_Tdot(bundle, H, hspec, tol or 1e-8)


def _dirac(bundle, H, hspec, tol, seed):
    vals = dirac_identity_residuals(bundle, hspec)
    comm = vals.pop("momentum_commutator")
    plain = vals.pop("plain")
    notes = [f"||[Pi_1, Pi_2]|| = {comm:.3e}", f"plain identity D^2 = 2 H_kin (x) 1: {plain:.3e}"]
    return _dict_report("dirac_identity", bundle, vals, tol or 1e-9, notes)


def _evolution(bundle, H, hspec, tol, seed, t: float = 0.7, h: float = 1e-4):
    if isinstance(bundle, MoyalBundle):
        raise PreconditionError("evolution runs on dense models")
    ev = Evolution(H)
    res = []
    for lab, a in list(bundle.rep.closed_generators().items()):
        obs = ev.at(a, t, lab)
        res.append((f"norm:{lab}", abs(hs_norm(obs.matrix) - hs_norm(a)) / max(hs_norm(a), 1e-300)))
        vel = obs.velocity()
        fd = obs.finite_difference(h)
        res.append((f"fd:{lab}", hs_norm(fd - vel) / max(hs_norm(vel), 1.0)))
    return CheckReport("evolution", bundle.label, res, tol or 1e-6, bundle.window_params(),
                       [f"t = {t}, central difference step {h}"])


CHECKS = {
    "relations": _relations,
    "scalarity": _scalarity,
    "weak_uncertainty": _weak,
    "strong_uncertainty": _strong,
    "weak_strong_equivalence": _equivalence,
    "positivity": _positivity,
    "reality": _reality,
    "moyal_consistency": _moyal,
    "lemma_tdot": _lemma,
    "dirac_identity": _dirac,
    "evolution": _evolution,
}
ALIASES = {"weak": "weak_uncertainty", "strong": "strong_uncertainty", "equivalence": "weak_strong_equivalence"}
DEFAULT_CHECKS = {
    "finite_sum": ["weak_uncertainty", "strong_uncertainty", "weak_strong_equivalence", "positivity", "evolution"],
    "almost_commutative": ["relations", "weak_uncertainty", "strong_uncertainty", "positivity", "lemma_tdot",
                           "evolution"],
    "moyal": ["weak_uncertainty", "strong_uncertainty", "moyal_consistency"],
    "double_torus": ["relations", "weak_uncertainty", "strong_uncertainty", "positivity", "reality", "evolution"],
    "nc_torus": ["relations", "scalarity", "weak_uncertainty", "strong_uncertainty", "positivity", "reality",
                 "dirac_identity", "evolution"],
}
NEEDS_H = {"weak_uncertainty", "strong_uncertainty", "positivity", "reality", "moyal_consistency", "lemma_tdot",
           "dirac_identity", "evolution"}


def resolve_checks(text: str, family: str) -> list[str]:
    if text == "all":
        return list(DEFAULT_CHECKS[family])
    out = []
    for name in (s.strip() for s in text.split(",") if s.strip()):
        name = ALIASES.get(name, name)
        if name not in CHECKS:
            raise InputError(f"unknown check {name!r}; known: {', '.join(CHECKS)}")
        out.append(name)
    if not out:
        raise InputError("no checks requested")
    return out


def _write(path: str, text: str):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_check(args) -> int:
    man = RunManifest(args.spec, args.ham, [], args.seed, args.tol, args.out, args.window_margin, args.jobs)
    bundle = man.model()
    names = resolve_checks(args.checks, bundle.family)
    hspec, H = (None, None)
    if any(n in NEEDS_H for n in names):
        hspec, H = man.hamiltonian(bundle)
    # warm the shared span caches once so concurrent checks only read them
    if any(n in ("weak_uncertainty", "strong_uncertainty") for n in names) and not isinstance(bundle, MoyalBundle):
        bundle.center_basis()
        if "strong_uncertainty" in names:
            bundle.bimodule_basis()

    def run(name):
        return CHECKS[name](bundle, H, hspec, man.tol, man.seed)

    if man.jobs > 1:
        with ThreadPoolExecutor(max_workers=man.jobs) as ex:
            reports = list(ex.map(run, names))
    else:
        reports = [run(n) for n in names]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "residual_max", "verdict"])
    for r in reports:
        w.writerow([r.check, f"{r.residual_max:.6e}", r.verdict])
        print(r)
    if man.out:
        for r in reports:
            _write(os.path.join(man.out, f"{r.check}.json"), r.to_json() + "\n")
        _write(os.path.join(man.out, "summary.csv"), buf.getvalue())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _parse_lambda(args):
    if args.theta is not None and args.lam is not None:
        raise InputError("give --theta or --lambda, not both")
    if args.theta is not None:
        return nc_torus_lambda(parse_theta(args.theta))
    if args.lam is not None:
        try:
            re, im = (float(v) for v in args.lam.split(","))
        except ValueError as exc:
            raise InputError("--lambda expects RE,IM") from exc
        return complex(re, im)
    return None


def cmd_decompose(args) -> int:
    lam = _parse_lambda(args)
    path = args.coeffs
    if path.endswith(".csv"):
        if not os.path.exists(path):
            raise InputError(f"{path}: no such file")
        if args.radius is None or lam is None:
            raise InputError("CSV input needs --radius and --theta or --lambda")
        with open(path) as fh:
            coeffs = DerivationCoeffs.from_csv(fh.read(), args.radius, lam)
    else:
        coeffs = DerivationCoeffs.from_dict(load_json(path), lam)
    dio = check_diophantine(coeffs.lam, max_n=max(2 * coeffs.R, 1))
    if dio.resonant_n is not None:
        raise InputError(f"resonant lambda: lambda^{dio.resonant_n} = 1")
    dec = decompose_derivation(coeffs)
    text = json.dumps(dec.to_dict(), indent=2) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"decomposition residual {dec.residual:.3e}", file=sys.stderr)
    return EXIT_OK if dec.residual < 1e-9 else EXIT_FAIL


def cmd_evolve(args) -> int:
    man = RunManifest(args.spec, args.ham, [], args.seed, args.tol, None, args.window_margin)
    bundle = man.model()
    if isinstance(bundle, MoyalBundle):
        raise InputError("evolve runs on dense models")
    _, H = man.hamiltonian(bundle)
    try:
        a = bundle.resolve(args.observable)
    except ModelInputError as exc:
        raise InputError(str(exc)) from exc
    try:
        times = [float(t) for t in args.times.split(",")]
    except ValueError as exc:
        raise InputError("--times expects a comma list of numbers") from exc
    entries = []
    for pair in args.entries.split(";"):
        try:
            i, j = (int(v) for v in pair.split(","))
        except ValueError as exc:
            raise InputError(f"--entries expects 'i,j;k,l', got {args.entries!r}") from exc
        if not (0 <= i < bundle.dim and 0 <= j < bundle.dim):
            raise InputError(f"entry ({i}, {j}) outside dimension {bundle.dim}")
        entries.append((i, j))
    ev = Evolution(H)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "hs_norm", "velocity_residual"]
               + [f"{part}[{i},{j}]" for i, j in entries for part in ("re", "im")])
    for t in times:
        obs = ev.at(a, t, args.observable)
        vel = obs.velocity()
        res = hs_norm(obs.finite_difference(args.step) - vel)
        row = [f"{t:.12g}", f"{hs_norm(obs.matrix):.15e}", f"{res:.6e}"]
        for i, j in entries:
            row += [f"{obs.matrix[i, j].real:.15e}", f"{obs.matrix[i, j].imag:.15e}"]
        w.writerow(row)
    if args.out:
        _write(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_distance(args) -> int:
    man = RunManifest(args.spec, args.ham, [], args.seed, args.tol, None, args.window_margin)
    bundle = man.model()
    if isinstance(bundle, MoyalBundle):
        raise InputError("distance runs on dense models")
    data = load_json(args.manifest)
    if "chi" not in data or "phi" not in data:
        raise InputError("distance manifest needs 'chi' and 'phi'")
    chi, phi = StateSpec.from_dict(data["chi"]), StateSpec.from_dict(data["phi"])
    Dspec = data.get("D", "dirac")
    if Dspec == "dirac":
        if args.ham is None:
            raise InputError("D = 'dirac' needs --ham")
        D = dirac_operator(bundle, HamiltonianSpec.from_dict(load_json(args.ham)))
    else:
        D = parse_matrix(Dspec)
    tol = float(data.get("tol", args.tol if args.tol is not None else 1e-4))
    res = connes_distance(bundle, D, chi, phi, tol=tol)
    out = res.to_dict()
    if res.infinite:
        out["notes"].append("warning: distance is infinite")
        print("warning: distance is infinite", file=sys.stderr)
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncqm", description="Axiom checks for noncommutative configuration spaces.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec_required=True):
        sp.add_argument("--spec", required=spec_required, help="model spec JSON")
        sp.add_argument("--ham", help="hamiltonian spec JSON")
        sp.add_argument("--seed", type=int, default=0, help="seed for sampled probes")
        sp.add_argument("--tol", type=float, default=None, help="tolerance override")
        sp.add_argument("--window-margin", type=int, default=None, help="override the model window margin")

    c = sub.add_parser("check", help="run axiom checks")
    common(c)
    c.add_argument("--checks", default="all", help="comma list or 'all'")
    c.add_argument("--out", help="directory for report JSONs and summary.csv")
    c.add_argument("--jobs", type=int, default=1, help="checks run concurrently")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("decompose", help="split a derivation into standard and inner parts")
    d.add_argument("coeffs", help="coefficient file (JSON, or CSV with --radius)")
    d.add_argument("--theta", help="deformation parameter, e.g. 0.618 or 2/5")
    d.add_argument("--lambda", dest="lam", help="lambda as RE,IM (write --lambda=RE,IM when RE is negative)")
    d.add_argument("--radius", type=int, help="lattice radius R for CSV input")
    d.add_argument("--out", help="output JSON path")
    d.set_defaults(func=cmd_decompose)

    e = sub.add_parser("evolve", help="Heisenberg evolution of an observable")
    common(e)
    e.add_argument("--observable", required=True, help="operator label")
    e.add_argument("--times", default="0", help="comma list of times")
    e.add_argument("--entries", default="0,0", help="matrix entries to record, 'i,j;k,l'")
    e.add_argument("--step", type=float, default=1e-4, help="finite-difference step")
    e.add_argument("--out", help="output CSV path")
    e.set_defaults(func=cmd_evolve)

    s = sub.add_parser("distance", help="spectral distance between two states")
    common(s)
    s.add_argument("manifest", help='JSON with "chi", "phi" and optional "D", "tol"')
    s.add_argument("--out", help="output JSON path")
    s.set_defaults(func=cmd_distance)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ResonanceError as exc:
        print(f"error: resonant lambda at n = {exc.n}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, *INPUT_ERRORS, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
