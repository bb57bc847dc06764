"""Claim suites: exact checks where the statement is an algebraic identity,
sampled evidence where it is a statement about all orbits."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from . import linalg as la
from .dynamics import (
    ESCAPES,
    STATIONARY,
    EscapeMonitor,
    IntegratorConfig,
    State,
    estimate_frequencies,
    exceptional_frequency,
    integrate,
    integrate_batch,
    monotone_escape_detector,
    winding_frequency,
)
from .exact_poly import PolyExpr, compile_numeric, factor_out_cos, weighted_sos_form
from .grammar import format_expr
from .poisson_core import TorusKind, classify_torus
from .systems import (
    Kind,
    SystemModel,
    build_ham_params,
    build_rev_params,
    displayed_bracket_matrix,
    family_substitutions,
    first_integrals,
    make_system,
    make_torus,
    plan_parameters,
    plan_reversible,
    reversibility_check,
    torus_frequency,
)

VERIFIED_EXACT = "verified-exact"
VERIFIED_NUMERIC = "verified-numeric"
EVIDENCE_ONLY = "evidence-only"
FAILED = "failed"


class MissingDomain(ValueError):
    pass


@dataclass(frozen=True)
class ClaimReport:
    claim: str
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict != FAILED


@dataclass(frozen=True)
class DomainSpec:
    """{p_v in I_{eps_v} mod 2 pi, q_v != q*_v, and optionally u_i != u*_i}.

    I_{+1} = (-pi/2, pi/2), I_{-1} = (pi/2, 3 pi/2).  Reversible kinds have
    no p, so ``eps`` is empty there.
    """

    q_star: tuple[float, ...]
    eps: tuple[int, ...] = ()
    u_star: tuple[float, ...] | None = None

    def __post_init__(self):
        if any(e not in (1, -1) for e in self.eps):
            raise ValueError("eps entries must be +1 or -1")

    @classmethod
    def isolation(cls, system: SystemModel) -> "DomainSpec":
        """The domain around the torus through the origin: u != pi, q != pi,
        and p in (-pi/2, pi/2) for Hamiltonian kinds."""
        l = len(system.index("q"))
        eps = (1,) * l if system.kind.hamiltonian else ()
        return cls((math.pi,) * l, eps, (math.pi,) * len(system.index("u")))

    def bind(self, system: SystemModel) -> "BoundDomain":
        return BoundDomain(self, system.index("u"), system.index("p"), system.index("q"))


@dataclass(frozen=True)
class BoundDomain:
    spec: DomainSpec
    u_idx: list
    p_idx: list
    q_idx: list

    def _p_ok(self, x):
        ok = np.ones(x.shape[1], dtype=bool)
        for e, i in zip(self.spec.eps, self.p_idx):
            c = np.cos(x[i])
            ok &= (c > 0) if e == 1 else (c < 0)
        return ok

    @staticmethod
    def _avoid(x, idx, star):
        """Each coordinate is at a point different from its star value."""
        ok = np.ones(x.shape[1], dtype=bool)
        for i, s in zip(idx, star):
            ok &= np.abs(np.sin((x[i] - s) / 2)) > 0
        return ok

    def contains_batch(self, x: np.ndarray) -> np.ndarray:
        ok = self._p_ok(x) & self._avoid(x, self.q_idx, self.spec.q_star)
        if self.spec.u_star is not None:
            ok &= self._avoid(x, self.u_idx, self.spec.u_star)
        return ok

    def contains(self, point: np.ndarray) -> bool:
        return bool(self.contains_batch(np.asarray(point, dtype=float)[:, None])[0])

    @staticmethod
    def _same_cell(x0, x, idx, star):
        ok = np.ones(x.shape[1], dtype=bool)
        for i, s in zip(idx, star):
            ok &= np.floor((x0[i] - s) / (2 * math.pi)) == np.floor((x[i] - s) / (2 * math.pi))
        return ok

    def path_inside(self, x0: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Still inside, with no excluded value crossed since x0 (unwrapped lifts)."""
        ok = self.contains_batch(x) & self._same_cell(x0, x, self.q_idx, self.spec.q_star)
        if self.spec.u_star is not None:
            ok &= self._same_cell(x0, x, self.u_idx, self.spec.u_star)
        return ok


# -- exact claims ------------------------------------------------------------------


def _expected_drift(system: SystemModel) -> list[PolyExpr]:
    params = system.params
    ctx = system.variables
    if system.kind.hamiltonian:
        d = params.dims
        grad = [
            params.h.derivative(f"u{i + 1}") if f"u{i + 1}" in params.h.variables else PolyExpr.zero()
            for i in range(d.s)
        ]
        out = []
        for a in range(d.n):
            acc = PolyExpr.zero(ctx)
            for i in range(d.s):
                if params.spec.Z[a][i]:
                    acc = acc + grad[i] * params.spec.Z[a][i]
            out.append(acc)
        return out
    return [h.with_variables(ctx) for h in params.h]


def verify_family_invariance(system: SystemModel, vector_field: Sequence[PolyExpr] | None = None) -> ClaimReport:
    field_ = list(vector_field if vector_field is not None else system.vector_field)
    drift = _expected_drift(system)
    phi_names = [n for n in system.names if n.startswith("phi")]
    cases = 0
    for subs in family_substitutions(system):
        cases += 1
        for name, X in zip(system.names, field_):
            got = X.substitute(subs)
            if name.startswith("phi"):
                want = drift[phi_names.index(name)].substitute(subs)
            else:
                want = PolyExpr.zero()
            if got != want:
                return ClaimReport(
                    "family-invariance",
                    FAILED,
                    {"coordinate": name, "pinned": {k: str(v) for k, v in subs.items()},
                     "residual": format_expr(got - want)},
                )
    return ClaimReport(
        "family-invariance",
        VERIFIED_EXACT,
        {"pinned": list(system.family.pinned), "substitution_cases": cases,
         "statement": "du = dp = dq = 0 and dphi = frequency map on the family"},
    )


def _sos_text(dec) -> str:
    return " + ".join(f"{la.fraction_str(c)}*({format_expr(m)})^2" for c, m in dec) or "0"


def verify_monotonicity(system: SystemModel, domain: DomainSpec | None = None, samples: int = 100_000, seed: int = 0) -> ClaimReport:
    q_names = [n for n in system.names if n.startswith("q")]
    if not q_names:
        raise ValueError("monotonicity needs l >= 1")
    details: dict = {}
    if not system.kind.compact or not system.kind.hamiltonian:
        # dq/dt is a weighted sum of squares on the whole phase space
        for name in q_names:
            dec = weighted_sos_form(system.field_of(name))
            if dec is None:
                return ClaimReport("monotonicity", FAILED, {"coordinate": name, "field": format_expr(system.field_of(name))})
            details[name] = _sos_text(dec)
        return ClaimReport("monotonicity", VERIFIED_EXACT, details)
    if domain is None:
        raise MissingDomain("compact Hamiltonian kinds need a DomainSpec: cos p changes sign on the torus")
    for v, name in enumerate(q_names):
        A = factor_out_cos(system.field_of(name), f"p{v + 1}")
        dec = weighted_sos_form(A) if A is not None else None
        if dec is None:
            return ClaimReport("monotonicity", FAILED, {"coordinate": name, "reason": "no cos p * (sum of squares) factorisation"})
        details[name] = f"cos(p{v + 1}) * [{_sos_text(dec)}]"
    # sign sampling of eps_v dq_v/dt inside the domain
    cols = [n for n in system.names if not n.startswith("phi")]
    pts = _sobol(len(cols), samples, seed)
    x = np.zeros((len(system.names), samples))
    for j, n in enumerate(cols):
        i = system.names.index(n)
        r = pts[:, j]
        if n.startswith("p"):
            v = int(n[1:]) - 1
            centre = 0.0 if domain.eps[v] == 1 else math.pi
            x[i] = centre + (r - 0.5) * math.pi
        else:
            x[i] = -math.pi + 2 * math.pi * r
    inside = domain.bind(system).contains_batch(x)
    x = x[:, inside]
    f = compile_numeric([system.field_of(n) for n in q_names], system.names)(x)
    signed = np.asarray(domain.eps, dtype=float)[:, None] * f
    violations = int(np.sum(signed < -1e-14))
    details.update({"samples": int(x.shape[1]), "violations": violations, "min_signed_rate": float(signed.min())})
    return ClaimReport("monotonicity", VERIFIED_NUMERIC if violations == 0 else FAILED, details)


def verify_poisson_matrix(system: SystemModel) -> ClaimReport:
    if not system.kind.hamiltonian:
        raise ValueError("Poisson brackets need a Hamiltonian kind")
    I = first_integrals(system)
    d = system.params.dims
    st = system.structure
    details: dict = {"integrals": list(I.names)}
    nonzero = [
        (I.names[a], I.names[b], format_expr(I.brackets[a][b]))
        for a in range(len(I.names))
        for b in range(a + 1, len(I.names))
        if not I.brackets[a][b].is_zero()
    ]
    if nonzero:
        return ClaimReport("poisson-matrix", FAILED, {**details, "nonzero_brackets": nonzero})
    details["pairwise_involution"] = True
    # the canonical pairs and the conservation of u
    from .exact_poly import poisson_bracket

    if not system.kind.compact:
        for v in range(d.l):
            qv = PolyExpr.line(f"q{v + 1}").with_variables(system.variables)
            pv = PolyExpr.line(f"p{v + 1}").with_variables(system.variables)
            b = poisson_bracket(qv, pv, st)
            if b != 1:
                return ClaimReport("poisson-matrix", FAILED, {**details, f"{{q{v + 1},p{v + 1}}}": format_expr(b)})
        for i in range(d.s):
            ui = PolyExpr.line(f"u{i + 1}").with_variables(system.variables)
            b = poisson_bracket(ui, system.H, st)
            if not b.is_zero():
                return ClaimReport("poisson-matrix", FAILED, {**details, f"{{u{i + 1},H}}": format_expr(b)})
        details["canonical_pairs"] = "{q_v, p_v} = 1"
    if I.coordinate_brackets is not None:
        P = I.coordinate_brackets
        want = displayed_bracket_matrix(d.s, d.l)
        r = la.rank(P) if P else 0
        details.update({"coordinates": list(I.coordinate_names), "P_matches": P == want, "rank": r, "expected_rank": 2 * d.l})
        if d.l:
            details["note"] = "the coordinate functions u, p, q are first integrals but not pairwise in involution"
        if P != want or r != 2 * d.l:
            return ClaimReport("poisson-matrix", FAILED, details)
    return ClaimReport("poisson-matrix", VERIFIED_EXACT, details)


def verify_reversibility(system: SystemModel) -> ClaimReport:
    v = reversibility_check(system)
    details = {"type": list(v.type), "fix_dim": v.fix_dim, "fix_components": v.fix_components}
    if not v.reversible:
        details["residuals"] = {n: format_expr(r) for n, r in v.residuals}
        return ClaimReport("reversibility", FAILED, details)
    return ClaimReport("reversibility", VERIFIED_EXACT, details)


# -- sampled claims ------------------------------------------------------------------


def _sobol(dim: int, count: int, seed: int) -> np.ndarray:
    if dim == 0:
        return np.zeros((count, 0))
    m = max(0, math.ceil(math.log2(max(count, 1))))
    return qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)[:count]


@dataclass(frozen=True)
class ScanConfig:
    n_samples: int = 1000
    n_on_family: int = 64
    radius: float | None = None
    seed: int = 0
    delta: float = 1e-6
    stationary_tol: float = 1e-10
    integrator: IntegratorConfig = IntegratorConfig(method="rk4", dt=0.01, T=10.0)


def default_radius(system: SystemModel) -> float:
    """Half-width of the sampling box: the whole bounded test region for
    non-compact kinds, a small neighbourhood of the torus for compact ones."""
    return 0.05 if system.kind.compact else 1.0


def uniqueness_scan(system: SystemModel, n_samples: int = 1000, config: IntegratorConfig | None = None,
                    domain: DomainSpec | None = None, scan: ScanConfig | None = None) -> ClaimReport:
    scan = scan or ScanConfig(n_samples=n_samples)
    config = config or scan.integrator
    q_idx = system.index("q")
    if not q_idx:
        raise ValueError("uniqueness scan needs l >= 1")
    if system.family.d != 0:
        raise ValueError(f"uniqueness scan needs d = 0, this family has d = {system.family.d}")
    if system.kind.compact and domain is None:
        domain = DomainSpec.isolation(system)
    bound = domain.bind(system) if domain is not None else None
    radius = scan.radius if scan.radius is not None else default_radius(system)
    t0 = time.perf_counter()
    dim = len(system.names)
    phi_idx = system.index("phi")
    rest = [i for i in range(dim) if i not in phi_idx]
    rng = np.random.default_rng(scan.seed)
    pts = _sobol(len(rest), scan.n_samples, scan.seed)
    off = np.zeros((scan.n_samples, dim))
    off[:, rest] = (2 * pts - 1) * radius
    off[:, phi_idx] = rng.uniform(0, 2 * math.pi, size=(scan.n_samples, len(phi_idx)))
    on = np.zeros((scan.n_on_family, dim))
    on[:, phi_idx] = rng.uniform(0, 2 * math.pi, size=(scan.n_on_family, len(phi_idx)))
    # drop anything that happens to lie on the family (only the zero point here)
    off = off[np.any(off[:, rest] != 0, axis=1)]
    if bound is not None:
        off = off[bound.contains_batch(off.T)]
    signs = list(domain.eps) if (domain is not None and domain.eps) else [1] * len(q_idx)
    starts = np.vstack([off, on])
    mon = EscapeMonitor(q_idx, signs, scan.delta, scan.stationary_tol, domain=bound)
    integrate_batch(system, starts, config, observer=mon)
    verdicts = mon.verdicts()
    off_v, on_v = verdicts[: len(off)], verdicts[len(off):]
    escaped = sum(v == ESCAPES for v in off_v)
    on_flagged = sum(v == ESCAPES for v in on_v)
    on_stationary = sum(v == STATIONARY for v in on_v)
    details = {
        "off_family_samples": len(off),
        "escapes": escaped,
        "fraction_flagged": escaped / len(off) if len(off) else 0.0,
        "inconclusive": sum(v != ESCAPES for v in off_v),
        "on_family_samples": len(on),
        "on_family_flagged": on_flagged,
        "on_family_stationary": on_stationary,
        "radius": radius,
        "seed": scan.seed,
        "delta": scan.delta,
        "integrator": asdict(config),
        "domain": asdict(domain) if domain is not None else None,
        "seconds": round(time.perf_counter() - t0, 3),
        "scope": "sampled evidence for a statement about all orbits, not a proof",
    }
    ok = escaped == len(off) and on_flagged == 0
    return ClaimReport("uniqueness-evidence", EVIDENCE_ONLY if ok else FAILED, details)


def exceptional_torus_check(system: SystemModel, u0: Sequence[float], phi0: Sequence[float] | None = None,
                            config: IntegratorConfig = IntegratorConfig(dt=1e-3, T=20.0), tol: float = 1e-3) -> ClaimReport:
    """Start on the extra invariant torus {u = u0, p = 0, q_2 = ... = 0} of a
    compact kind: the escape detector must not flag it, and the measured
    frequencies must be (omega(u0), [l chi (l chi + xi_1)]^(1/2))."""
    params = system.params
    if not system.kind.compact:
        raise ValueError("the exceptional torus exists for compact kinds only")
    l = len(system.index("q"))
    chi = sum(float(z) * math.sin(float(u)) ** 2 for z, u in zip(params.zeta, u0))
    if not (l >= 1 and l * chi > 0):
        raise ValueError("need l >= 1 and chi > 0")
    phi0 = list(phi0 if phi0 is not None else [0.0] * len(system.index("phi")))
    start = State.from_parts(system, u=u0, phi=phi0)
    traj = integrate(system, start, config)
    q_idx = system.index("q")
    domain = DomainSpec.isolation(system).bind(system)
    verdict = monotone_escape_detector(traj, q_idx, domain=domain)
    est = estimate_frequencies(traj)
    omega = [float(w) for w in _omega_at(system, u0)]
    varpi = exceptional_frequency(l, chi, float(params.xi[0]))
    measured = winding_frequency(traj, "q1")
    details = {
        "detector": verdict,
        "omega_expected": omega,
        "omega_measured": est.omega.tolist(),
        "varpi_expected": varpi,
        "varpi_measured": measured,
    }
    ok = verdict != ESCAPES and np.allclose(est.omega, omega, atol=1e-8) and abs(measured - varpi) <= tol * varpi
    return ClaimReport("exceptional-torus", VERIFIED_NUMERIC if ok else FAILED, details)


def _omega_at(system: SystemModel, u0):
    from .systems import _frequency_at

    return _frequency_at(system, list(u0))


# -- arithmetic ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiophantineReport:
    omega: tuple[float, ...]
    tau: float
    J_max: int
    gamma_hat: float
    worst_j: tuple[int, ...] | None
    resonant: bool
    witness: tuple[int, ...] | None = None
    exact: bool | None = None
    tolerance: float = 1e-12


def _level(n: int, r: int) -> np.ndarray:
    """All integer vectors of length n and l1 norm exactly r."""
    if n == 1:
        return np.array([[r], [-r]]) if r else np.zeros((1, 1), dtype=np.int64)
    parts = []
    for a in range(-r, r + 1):
        tail = _level(n - 1, r - abs(a))
        parts.append(np.hstack([np.full((len(tail), 1), a), tail]))
    return np.vstack(parts).astype(np.int64)


def _canonical(js: np.ndarray) -> np.ndarray:
    """Keep one of each pair +-j: the one whose first nonzero entry is positive."""
    nz = js != 0
    first = np.argmax(nz, axis=1)
    lead = js[np.arange(len(js)), first]
    return js[lead > 0]


def diophantine_scan(omega: Sequence, tau: float, J_max: int, tolerance: float = 1e-12) -> DiophantineReport:
    if J_max < 1:
        raise ValueError("J_max must be at least 1")
    rational = all(isinstance(w, (int, Fraction, str)) and not isinstance(w, bool) for w in omega)
    exact = [la.to_fraction(w) for w in omega] if rational else None
    w = np.array([float(la.to_fraction(x)) for x in omega])
    n = len(w)
    best, worst = math.inf, None
    for r in range(1, J_max + 1):
        js = _canonical(_level(n, r))
        if not len(js):
            continue
        vals = np.abs(js @ w)
        hit = np.flatnonzero(vals < tolerance)
        if exact is not None:
            # float near-misses with rational omega are not resonances
            hit = [i for i in hit if sum(int(a) * b for a, b in zip(js[i], exact)) == 0]
        if len(hit):
            j = tuple(int(v) for v in js[hit[0]])
            return DiophantineReport(tuple(w.tolist()), tau, J_max, 0.0, j, True, j, exact is not None, tolerance)
        g = vals * float(r) ** tau
        i = int(np.argmin(g))
        if g[i] < best:
            best, worst = float(g[i]), tuple(int(v) for v in js[i])
    return DiophantineReport(tuple(w.tolist()), tau, J_max, best, worst, False, None, exact is not None, tolerance)


# -- suites ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HamRegime:
    N: int
    n: int
    target: str
    d: int
    omega: tuple
    compact: bool = False


@dataclass(frozen=True)
class RevRegime:
    n: int
    m: int
    l: int
    d_star: int
    d: int
    omega: tuple
    compact: bool = False


def build_regime(regime: HamRegime | RevRegime) -> SystemModel:
    if isinstance(regime, HamRegime):
        skel = plan_parameters(regime.N, regime.n, regime.target, regime.d)
        kind = Kind.HAM_COMPACT if regime.compact else Kind.HAM_NONCOMPACT
        return make_system(build_ham_params(skel, regime.omega, kind))
    skel = plan_reversible(regime.n, regime.m, regime.l, regime.d_star, regime.d)
    kind = Kind.REV_COMPACT if regime.compact else Kind.REV_NONCOMPACT
    return make_system(build_rev_params(skel, regime.omega, kind))


def verify_theorem_suite(regime: HamRegime | RevRegime, scan: ScanConfig | None = None,
                         system: SystemModel | None = None) -> list[ClaimReport]:
    system = system or build_regime(regime)
    reports: list[ClaimReport] = []
    fam = system.family
    d_ok = fam.d == regime.d
    det = {"d": fam.d, "expected": regime.d, "free": list(fam.free), "pinned": list(fam.pinned)}
    if isinstance(regime, RevRegime):
        det.update({"d_star": fam.d_star, "expected_d_star": regime.d_star})
        d_ok = d_ok and fam.d_star == regime.d_star
    reports.append(ClaimReport("family-dimension", VERIFIED_EXACT if d_ok else FAILED, det))
    if isinstance(regime, HamRegime):
        cls = classify_torus(system.structure)
        want = TorusKind.parse(regime.target)
        reports.append(ClaimReport(
            "torus-class",
            VERIFIED_EXACT if cls.kind is want else FAILED,
            {"class": cls.kind.value, "expected": want.value, "intersection_dim": cls.intersection_dim,
             "dims": asdict(system.params.dims)},
        ))
    l = len(system.index("q"))
    zero_torus = make_torus(system, [0] * len(system.index("u")), [0] * len(system.index("p")), [0] * l)
    freq = torus_frequency(system, zero_torus)
    want_w = tuple(la.to_fraction(w) for w in regime.omega)
    reports.append(ClaimReport(
        "frequency-realization",
        VERIFIED_EXACT if tuple(freq) == want_w and zero_torus.symmetric else FAILED,
        {"omega": [la.fraction_str(x) for x in freq], "symmetric": zero_torus.symmetric},
    ))
    reports.append(verify_family_invariance(system))
    if l:
        domain = DomainSpec.isolation(system) if system.kind.compact else None
        reports.append(verify_monotonicity(system, domain, samples=(scan.n_samples * 100 if scan else 100_000)))
    if system.kind.hamiltonian:
        reports.append(verify_poisson_matrix(system))
    reports.append(verify_reversibility(system))
    if l and fam.d == 0:
        reports.append(uniqueness_scan(system, scan=scan or ScanConfig()))
    return reports


def all_ok(reports: Sequence[ClaimReport]) -> bool:
    return all(r.ok for r in reports)


def render_table(reports: Sequence[ClaimReport]) -> str:
    rows = [("claim", "verdict", "key numbers")]
    for r in reports:
        rows.append((r.claim, r.verdict, _key_numbers(r.details)))
    w0 = max(len(a) for a, _, _ in rows)
    w1 = max(len(b) for _, b, _ in rows)
    return "\n".join(f"{a:<{w0}}  {b:<{w1}}  {c}" for a, b, c in rows)


def _key_numbers(details: dict) -> str:
    bits = []
    for k, v in details.items():
        if isinstance(v, (bool, int, float, str)) and len(str(v)) <= 40:
            bits.append(f"{k}={v}")
    return ", ".join(bits[:6])


def reports_to_json(reports: Sequence[ClaimReport], echo: dict | None = None) -> str:
    doc = {"claims": [asdict(r) for r in reports], "all_ok": all_ok(reports)}
    if echo is not None:
        doc["config"] = echo
    return json.dumps(doc, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, Fraction):
        return la.fraction_str(x)
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def iter_planner_regimes(N_max: int):
    from .systems import feasible_ham_regimes

    yield from feasible_ham_regimes(N_max)

