"""Command-line front end.

Exit codes: 0 success, 1 a verified claim failed, 2 usage error,
3 invalid input (document, config or parameters).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields
from fractions import Fraction

import numpy as np

from . import linalg as la
from .dynamics import (
    BlowUp,
    IntegratorConfig,
    NotLinear,
    State,
    estimate_frequencies,
    integrate,
    write_csv,
    write_sidecar,
)
from .io import DocumentError, dumps, load_system, normalize_document, params_to_document, read_json
from .poisson_core import StructureError, TorusKind, classify_torus, is_exact_form, torus_tangent_complement
from .systems import (
    InfeasibleRegime,
    Kind,
    NegativeConstant,
    build_ham_params,
    build_rev_params,
    make_torus,
    plan_parameters,
    plan_reversible,
    torus_frequency,
)
from .verify import (
    DomainSpec,
    HamRegime,
    RevRegime,
    ScanConfig,
    all_ok,
    diophantine_scan,
    render_table,
    reports_to_json,
    uniqueness_scan,
    verify_theorem_suite,
)

EXIT_OK, EXIT_CLAIM, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3


class InvalidInput(ValueError):
    pass


def _fractions(text: str) -> list[Fraction]:
    try:
        return [la.to_fraction(t) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidInput(f"cannot read {text!r} as comma-separated rationals") from exc


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    cfg = read_json(args.config)
    if not isinstance(cfg, dict):
        raise InvalidInput("config must be a JSON object")
    return cfg


def _system_doc(args, cfg: dict) -> dict:
    if getattr(args, "system", None):
        return read_json(args.system)
    doc = cfg.get("system")
    if isinstance(doc, str):
        return read_json(doc)
    if isinstance(doc, dict):
        return doc
    raise InvalidInput("no system document: pass --system or put 'system' in the config")


def _integrator(cfg: dict, **defaults) -> IntegratorConfig:
    block = {**defaults, **cfg.get("integrator", {})}
    known = {f.name for f in fields(IntegratorConfig)}
    extra = set(block) - known
    if extra:
        raise InvalidInput(f"unknown integrator fields {sorted(extra)}")
    return IntegratorConfig(**block)


def _omega_strings(omega) -> list[str]:
    return [la.fraction_str(la.to_fraction(w)) for w in omega]


# -- subcommands ---------------------------------------------------------------------


def cmd_plan(args) -> int:
    omega = _fractions(args.omega) if args.omega else None
    if args.rev:
        if None in (args.n, args.m, args.l, args.d_star, args.d):
            raise InvalidInput("--rev needs -n, -m, -l, --d-star and -d")
        skel = plan_reversible(args.n, args.m, args.l, args.d_star, args.d)
        omega = omega if omega is not None else [Fraction(1)] * args.n
        kind = Kind.REV_COMPACT if args.compact else Kind.REV_NONCOMPACT
        params = build_rev_params(skel, omega, kind, args.positive)
        plan = {"theorem": "rev", "n": args.n, "m": args.m, "l": args.l, "d_star": args.d_star, "d": args.d,
                "omega": _omega_strings(omega)}
    else:
        if None in (args.N, args.n, args.cls, args.d):
            raise InvalidInput("--ham needs -N, -n, --class and -d")
        skel = plan_parameters(args.N, args.n, TorusKind.parse(args.cls), args.d)
        omega = omega if omega is not None else [Fraction(int(skel.dims.s > 0))] * args.n
        kind = Kind.HAM_COMPACT if args.compact else Kind.HAM_NONCOMPACT
        params = build_ham_params(skel, omega, kind, args.positive)
        plan = {"theorem": "ham", "N": args.N, "n": args.n, "class": skel.target.value, "d": args.d,
                "omega": _omega_strings(omega)}
    doc = params_to_document(params, plan)
    load_system(doc)  # the emitted document must build
    _emit(dumps(doc), args.output)
    return EXIT_OK


def cmd_build(args) -> int:
    doc = _system_doc(args, _config(args))
    _emit(dumps(normalize_document(doc)), args.output)
    return EXIT_OK


def cmd_classify(args) -> int:
    doc = _system_doc(args, _config(args))
    system = load_system(doc)
    if not system.kind.hamiltonian:
        raise InvalidInput("classify needs a Hamiltonian system document")
    st = system.structure
    cls = classify_torus(st)
    d = st.dims
    out = {
        "dims": {"s": d.s, "k": d.k, "l": d.l, "N": d.N, "n": d.n},
        "class": cls.kind.value,
        "intersection_dim": cls.intersection_dim,
        "isotropic": cls.isotropic,
        "coisotropic": cls.coisotropic,
        "dim_T_perp": len(torus_tangent_complement(st)),
        "det_J": la.fraction_str(la.det(st.J)),
        "exact_form": is_exact_form(st),
        "config": {"system": doc},
    }
    _emit(json.dumps(out, indent=2), args.output)
    return EXIT_OK


def _start_state(system, cfg: dict) -> State:
    start = cfg.get("start", {})
    return State.from_parts(system, **{k: start.get(k, ()) for k in ("u", "phi", "p", "q")})


def cmd_simulate(args) -> int:
    cfg = _config(args)
    doc = _system_doc(args, cfg)
    system = load_system(doc)
    config = _integrator(cfg)
    start = _start_state(system, cfg)
    out = args.output or cfg.get("output", "trajectory.csv")
    echo = {"system": doc, "start": cfg.get("start", {}), "integrator": asdict(config), "seed": cfg.get("seed", 0)}
    try:
        traj = integrate(system, start, config)
        write_csv(traj, out)
        diag = {"status": "completed", "samples": len(traj.t)}
    except BlowUp as exc:
        write_csv(exc.trajectory, out, diagnostic=f"BlowUp t={exc.time:.17g} {exc}")
        diag = {"status": "BlowUp", "time": exc.time, "message": str(exc)}
        print(f"BlowUp: {exc}", file=sys.stderr)
    write_sidecar(out + ".json", doc, echo, diag)
    return EXIT_OK


def cmd_frequencies(args) -> int:
    cfg = _config(args)
    doc = _system_doc(args, cfg)
    system = load_system(doc)
    config = _integrator(cfg, T=100.0, dt=1e-3, sample_every=10)
    start = _start_state(system, cfg)
    u = [start[n] for n in system.names if n.startswith("u")]
    p = [start[n] for n in system.names if n.startswith("p") and not n.startswith("phi")]
    q = [start[n] for n in system.names if n.startswith("q")]
    torus = make_torus(system, u, p, q)
    planned = [float(w) for w in torus_frequency(system, torus)] if torus.in_family else None
    tol = float(cfg.get("tolerance", 1e-6))
    out = {"config": {"system": doc, "start": cfg.get("start", {}), "integrator": asdict(config), "tolerance": tol}}
    code = EXIT_OK
    try:
        est = estimate_frequencies(integrate(system, start, config))
        out.update({"estimated": est.omega.tolist(), "residual": est.residual, "planned": planned})
        if planned is not None:
            err = float(np.max(np.abs(est.omega - np.array(planned)), initial=0.0))
            out["max_error"] = err
            code = EXIT_OK if err <= tol else EXIT_CLAIM
    except (NotLinear, BlowUp) as exc:
        out.update({"estimated": None, "error": f"{type(exc).__name__}: {exc}", "planned": planned})
        code = EXIT_CLAIM if planned is not None else EXIT_OK
    _emit(json.dumps(out, indent=2), args.output)
    return code


def _scan_config(cfg: dict) -> ScanConfig:
    block = dict(cfg.get("scan", {}))
    if "seed" in cfg:
        block.setdefault("seed", cfg["seed"])
    if "integrator" in cfg:
        block["integrator"] = _integrator(cfg, dt=0.01, T=10.0)
    known = {f.name for f in fields(ScanConfig)}
    extra = set(block) - known
    if extra:
        raise InvalidInput(f"unknown scan fields {sorted(extra)}")
    return ScanConfig(**block)


def _regime_from(cfg: dict, doc: dict | None):
    r = cfg.get("regime") or (doc or {}).get("plan")
    if not r:
        raise InvalidInput("verify needs a 'regime' block or a planner document with a 'plan' block")
    omega = tuple(_fractions(",".join(str(w) for w in r["omega"])))
    compact = bool(r.get("compact", doc is not None and Kind(doc["kind"]).compact))
    if r.get("theorem", "ham") == "ham":
        return HamRegime(int(r["N"]), int(r["n"]), str(r["class"]), int(r["d"]), omega, compact)
    return RevRegime(int(r["n"]), int(r["m"]), int(r["l"]), int(r["d_star"]), int(r["d"]), omega, compact)


def _report(reports, echo, args) -> int:
    text = render_table(reports) if args.format == "text" else reports_to_json(reports, echo)
    _emit(text, args.output)
    return EXIT_OK if all_ok(reports) else EXIT_CLAIM


def cmd_verify(args) -> int:
    cfg = _config(args)
    doc = None
    if args.system or "system" in cfg:
        doc = _system_doc(args, cfg)
    regime = _regime_from(cfg, doc)
    scan = _scan_config(cfg)
    system = load_system(doc) if doc is not None else None
    reports = verify_theorem_suite(regime, scan, system)
    echo = {"regime": asdict(regime), "scan": asdict(scan), "system": doc}
    return _report(reports, echo, args)


def cmd_scan(args) -> int:
    cfg = _config(args)
    doc = _system_doc(args, cfg)
    system = load_system(doc)
    scan = _scan_config(cfg)
    dom = cfg.get("domain")
    domain = None
    if dom is not None:
        domain = DomainSpec(tuple(dom["q_star"]), tuple(dom.get("eps", ())), tuple(dom["u_star"]) if dom.get("u_star") else None)
    report = uniqueness_scan(system, domain=domain, scan=scan)
    echo = {"system": doc, "scan": asdict(scan), "domain": dom}
    return _report([report], echo, args)


def cmd_diophantine(args) -> int:
    omega = [t.strip() for t in args.omega.split(",") if t.strip()]
    try:
        values = [la.to_fraction(t) if "/" in t or t.lstrip("-").isdigit() else float(t) for t in omega]
    except ValueError as exc:
        raise InvalidInput(f"cannot read omega {args.omega!r}") from exc
    rep = diophantine_scan(values, args.tau, args.jmax)
    out = {**asdict(rep), "config": {"omega": omega, "tau": args.tau, "J_max": args.jmax}}
    _emit(json.dumps(out, indent=2, default=str), args.output)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ktori", description="Explicit systems with families of Kronecker tori.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, system=True):
        p.add_argument("--config", help="experiment config (JSON)")
        if system:
            p.add_argument("--system", help="system document (JSON); overrides config['system']")
        p.add_argument("-o", "--output", help="output path (default: stdout)")

    p = sub.add_parser("plan", help="emit a system document for a parameter regime")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--ham", action="store_true", help="Hamiltonian family")
    g.add_argument("--rev", action="store_true", help="reversible family")
    p.add_argument("-N", type=int, help="degrees of freedom (Hamiltonian)")
    p.add_argument("-n", type=int, help="torus dimension")
    p.add_argument("-m", type=int, help="dim Fix G (reversible)")
    p.add_argument("-l", type=int, help="codim Fix G - n (reversible)")
    p.add_argument("--class", dest="cls", help="Lagrangian | isotropic | coisotropic | atropic")
    p.add_argument("-d", type=int, help="family dimension")
    p.add_argument("--d-star", dest="d_star", type=int, help="symmetric subfamily dimension (reversible)")
    p.add_argument("--omega", help="comma-separated frequencies, read as exact decimals or p/q")
    p.add_argument("--compact", action="store_true", help="compact (torus) phase space")
    p.add_argument("--positive", default="1", help="value of the non-zero constants (default 1)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("build", help="validate and normalise a system document")
    common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("classify", help="torus class and structure identities")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="integrate and write a trajectory CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("frequencies", help="estimate torus frequencies and compare with the frequency map")
    common(p)
    p.set_defaults(func=cmd_frequencies)

    for name, fn, helptext in (("verify", cmd_verify, "run the claim suite for a regime"),
                               ("scan", cmd_scan, "uniqueness / isolation scan")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--format", choices=("text", "json"), default="json")
        p.set_defaults(func=fn)

    p = sub.add_parser("diophantine", help="resonance and Diophantine constant scan")
    p.add_argument("--omega", required=True)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--jmax", type=int, default=50)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_diophantine)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (InvalidInput, DocumentError, StructureError, InfeasibleRegime, NegativeConstant,
            json.JSONDecodeError, OSError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
