"""Command-line front end.

Exit codes: 0 pass, 1 checked failure, 2 usage or configuration error.
Reports are JSON (``schema: 1``) or CSV for spectra; stdout carries one
summary line per command.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from .chains import ChainSpec, chi_conjugate, commutation_scan, sample_grid, transfer
from .hamiltonians import (
    FD_STEP,
    FD_TOL,
    ShiftPartError,
    SingularTransferError,
    closed_form_H,
    gl2_example_H,
    locality_report,
    log_derivative,
    spectrum,
)
from .models import ConfigError, gl2_model, model_from_config, perturb
from .sampling import Sampler, resolve_seed
from .shift_calculus import diffop_mul, diffop_residual
from .verifier import DEFAULT_SAMPLES, DEFAULT_TOL, identity_suite

SCHEMA = 1
MAX_LEGS = 8
RUN_KEYS = {"schema", "model", "command", "N", "samples", "gamma", "xi", "tol", "fd_step", "seed", "out",
            "format", "perturb", "perturb_which", "lam"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------
def _read_json(path) -> dict:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise UsageError(f"file not found: {p}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{p}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise UsageError(f"{p}: expected a JSON object")
    return data


def load_run_config(path) -> dict:
    cfg = _read_json(path)
    unknown = set(cfg) - RUN_KEYS
    if unknown:
        raise UsageError(f"unknown run config fields: {sorted(unknown)}")
    if cfg.get("schema", SCHEMA) != SCHEMA:
        raise UsageError(f"unsupported run config schema {cfg['schema']!r}")
    return cfg


def build_model(args):
    if args.model is None:
        raise UsageError("--model is required")
    cfg = _read_json(args.model)
    if args.gamma is not None:
        cfg["gamma"] = args.gamma
    if args.xi is not None:
        cfg["xi"] = args.xi
    if cfg.get("schema", SCHEMA) != SCHEMA:
        raise UsageError(f"unsupported model schema {cfg['schema']!r}")
    try:
        model = model_from_config(cfg)
    except ConfigError as e:
        raise UsageError(str(e)) from None
    if getattr(args, "perturb", None):
        model = perturb(model, args.perturb, args.perturb_which, args.seed)
    return model


def build_chain(model, N: int) -> ChainSpec:
    legs = N if model.boundary == "SP" else 2 * N
    if N < 1 or legs > MAX_LEGS:
        raise UsageError(f"N = {N} gives {legs} legs; allowed range is 1..{MAX_LEGS} legs")
    return ChainSpec(model, N)


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def parse_lam(text: str) -> np.ndarray:
    try:
        return np.array([complex(p.strip().replace(" ", "")) for p in text.split(",")], dtype=complex)
    except ValueError:
        raise UsageError(f"cannot parse λ {text!r}; expected e.g. '0.3+0.1j,-0.2'") from None


# ---------------------------------------------------------------------------
# commands; each returns (passed, report dict, summary line)
# ---------------------------------------------------------------------------
def cmd_verify(args):
    model = build_model(args)
    reports = identity_suite(model, samples=args.samples, tol=args.tol or DEFAULT_TOL, seed=args.seed)
    ok = all(r.passed for r in reports)
    body = {"model": model.name, "flavor": model.flavor, "perturb": args.perturb,
            "identities": [r.to_dict() for r in reports]}
    worst = max(r.max_residual for r in reports)
    n_ok = sum(r.passed for r in reports)
    return ok, body, f"verify {model.name}: {n_ok}/{len(reports)} identities pass (worst residual {worst:.3g})"


def cmd_commute(args):
    model = build_model(args)
    chain = build_chain(model, args.N)
    us, vs, lams = sample_grid(chain, args.seed, args.samples)
    rep = commutation_scan(chain, us, vs, lams, tol=args.tol or 1e-8)
    summary = f"commute {model.name} N={args.N}: max residual {rep.max_residual:.3g}"
    if model.flavor == "semidynamical":
        summary += f" (on λ-constant functions {rep.restricted_max:.3g})"
    return rep.passed, rep.to_dict(), summary


def _closed_form(chain, args, lams):
    notes = []
    m = chain.model
    if m.flavor == "nondynamical" and chain.mode != "identity":
        chain = ChainSpec(chi_conjugate(m), chain.N)
        notes.append("χ absorbed by conjugation; H is similar to the original one")
    rep = closed_form_H(chain, lams, tol=args.tol or FD_TOL, h=args.fd_step, seed=args.seed)
    rep.notes[:0] = notes
    return locality_report(rep)


def cmd_hamiltonian(args):
    model = build_model(args)
    chain = build_chain(model, args.N)
    lams = Sampler(args.seed, model.n).lams(args.samples, model.guard)
    try:
        rep = _closed_form(chain, args, lams)
    except SingularTransferError as e:
        return False, {"model": model.name, "error": str(e)}, f"hamiltonian {model.name}: {e}"
    body = rep.to_dict()
    if model.flavor != "semidynamical":
        left = log_derivative(chain, "left", h=args.fd_step, lam_probe=lams[:1])
        right = log_derivative(chain, "right", h=args.fd_step, lam_probe=lams[:1])
        body["left_right"] = diffop_residual(left, right, lams)
        v = Sampler(args.seed + 1, model.n).u(avoid=tuple(model.u_poles), margin=0.25)
        tv = transfer(chain, v).value
        body["commutator"] = diffop_residual(diffop_mul(left, tv), diffop_mul(tv, left), lams)
    ok = bool(rep.passed and rep.locality["passed"])
    return ok, body, (f"hamiltonian {model.name} N={args.N}: closed-form residual {rep.residual:.3g}, "
                      f"locality {'pass' if rep.locality['passed'] else 'FAIL'}")


def cmd_spectrum(args):
    model = build_model(args)
    chain = build_chain(model, args.N)
    lam = parse_lam(args.lam) if args.lam else Sampler(args.seed, model.n).lam(model.guard)
    if lam.shape != (model.n,):
        raise UsageError(f"λ needs {model.n} components")
    H = log_derivative(chain, h=args.fd_step, lam_probe=[lam])
    try:
        sp = spectrum(H, lam, chain)
    except ShiftPartError as e:
        return False, {"model": model.name, "error": str(e)}, f"spectrum {model.name}: {e}"
    body = {"model": model.name, "N": args.N, "lambda": [_c(x) for x in lam],
            "eigenvalues": [_c(x) for x in sp.values], "commutator": sp.commutator}
    ok = sp.commutator is None or sp.commutator < 1e-7
    body["rows"] = sp.csv_rows()
    return ok, body, (f"spectrum {model.name} N={args.N}: {len(sp.values)} eigenvalues, "
                      f"[H, t(v)] = {sp.commutator:.3g}")


def cmd_example(args):
    gamma = 0.2 if args.gamma is None else args.gamma
    xi = 1.1 if args.xi is None else args.xi
    if args.N < 2 or args.N > MAX_LEGS:
        raise UsageError(f"the example needs 2 ≤ N ≤ {MAX_LEGS}")
    m = gl2_model(gamma, xi)
    lams = Sampler(args.seed, 2).lams(args.samples, m.guard)
    rep = gl2_example_H(args.N, lams, gamma, xi, tol=args.tol or FD_TOL, h=args.fd_step)
    r = rep.residuals
    return bool(rep.passed), rep.to_dict(), (
        f"example gl2 N={args.N}: bulk residual {r['bulk']:.3g}, boundary residual {r['boundary']:.3g} "
        f"(literal f, g grouping: {r['boundary_literal']:.3g})")


COMMANDS = {"verify": cmd_verify, "commute": cmd_commute, "hamiltonian": cmd_hamiltonian,
            "spectrum": cmd_spectrum, "example": cmd_example}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------
def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return _c(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def render(command: str, passed: bool, body: dict, fmt: str, timestamp: bool) -> str:
    if fmt == "csv":
        if "rows" not in body:
            raise UsageError("CSV output is only available for the spectrum command")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "index", "lambda1", "lambda2"])
        for re_, im_, i, l1, l2 in body["rows"]:
            w.writerow([repr(float(re_)), repr(float(im_)), i, str(complex(l1)), str(complex(l2))])
        return buf.getvalue()
    body = {k: v for k, v in body.items() if k != "rows"}
    doc = {"schema": SCHEMA, "command": command, "passed": bool(passed), "report": body}
    if timestamp:
        doc["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def strip_timestamp(doc: dict) -> dict:
    """The part of a JSON report that must be reproducible."""
    return {k: v for k, v in doc.items() if k != "timestamp"}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------
def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadbraid", description="Exchange-algebra spin chain checks.")
    sub = p.add_subparsers(dest="command")
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="run config JSON; explicit flags override it")
        s.add_argument("--model", help="model config JSON")
        s.add_argument("-N", type=int, default=None)
        s.add_argument("--samples", type=int, default=None)
        s.add_argument("--gamma", type=float, default=None)
        s.add_argument("--xi", type=float, default=None)
        s.add_argument("--tol", type=float, default=None)
        s.add_argument("--fd-step", type=float, default=None)
        s.add_argument("--seed", type=int, default=None, help="falls back to $QUADBRAID_SEED, then 0")
        s.add_argument("--out", help="report path (stdout summary only when omitted)")
        s.add_argument("--format", choices=("json", "csv"), default=None)
        s.add_argument("--no-timestamp", action="store_true", help="omit the timestamp (comparison mode)")
        s.add_argument("--perturb", type=float, default=None, help="add noise of this size to one structure matrix")
        s.add_argument("--perturb-which", choices=("A", "B", "C", "D"), default=None)
        s.add_argument("--lam", default=None, help="λ components for spectrum, comma separated")
    return p


DEFAULTS = {"N": 2, "fd_step": FD_STEP, "format": "json", "perturb_which": "A"}
SAMPLE_DEFAULTS = {"verify": DEFAULT_SAMPLES, "commute": 3, "hamiltonian": 5, "spectrum": 1, "example": 5}


def resolve_args(args) -> argparse.Namespace:
    cfg = load_run_config(args.config) if args.config else {}
    if cfg.get("command", args.command) != args.command:
        raise UsageError(f"run config is for {cfg['command']!r}, not {args.command!r}")
    for key in RUN_KEYS - {"schema", "command"}:
        if getattr(args, key, None) is None and key in cfg:
            setattr(args, key, cfg[key])
    for key, val in DEFAULTS.items():
        if getattr(args, key) is None:
            setattr(args, key, val)
    if args.samples is None:
        args.samples = SAMPLE_DEFAULTS[args.command]
    args.seed = resolve_seed(args.seed)
    if args.format == "csv" and args.command != "spectrum":
        raise UsageError("CSV output is only available for the spectrum command")
    return args


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = resolve_args(args)
        passed, body, summary = COMMANDS[args.command](args)
        text = render(args.command, passed, body, args.format, not args.no_timestamp)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"failed: {e}", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_text(text)
    print(("PASS " if passed else "FAIL ") + summary)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
