"""Numerical integration and trajectory diagnostics.

Angles are integrated as real-valued lifts (no wrapping during the run), so
frequencies are plain least-squares slopes of the stored columns.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .exact_poly import PolyExpr, compile_numeric
from .systems import SystemModel

TWO_PI = 2 * math.pi


class BlowUp(RuntimeError):
    def __init__(self, message: str, trajectory: "Trajectory | None" = None, time: float | None = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.time = time


class NoConvergence(RuntimeError):
    pass


class NotLinear(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class StepTooLarge(ValueError):
    pass


METHODS = ("rk4", "midpoint", "exact-split")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    dt: float = 1e-3
    T: float = 10.0
    tol: float = 1e-13
    max_iter: int = 50
    blowup: float = 1e8
    substeps: int = 8
    sample_every: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")
        if self.substeps < 1 or self.sample_every < 1:
            raise ValueError("substeps and sample_every must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class State:
    names: tuple[str, ...]
    values: np.ndarray
    angle_mask: tuple[bool, ...]

    @classmethod
    def from_parts(cls, system: SystemModel, u=(), phi=(), p=(), q=()) -> "State":
        parts = {"u": list(u), "phi": list(phi), "p": list(p), "q": list(q)}
        values = []
        for prefix in ("u", "phi", "p", "q"):
            want = len(system.index(prefix))
            got = parts[prefix] or [0.0] * want
            if len(got) != want:
                raise ValueError(f"{prefix} needs {want} entries, got {len(got)}")
            values.extend(float(v) for v in got)
        return cls(system.names, np.array(values), system.angle_mask)

    @classmethod
    def of(cls, system: SystemModel, values) -> "State":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (len(system.names),):
            raise ValueError(f"state needs {len(system.names)} entries, got shape {arr.shape}")
        return cls(system.names, arr.copy(), system.angle_mask)

    def wrapped(self) -> np.ndarray:
        out = self.values.copy()
        mask = np.array(self.angle_mask)
        out[mask] = np.mod(out[mask], TWO_PI)
        return out

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


@dataclass
class Trajectory:
    names: tuple[str, ...]
    t: np.ndarray
    x: np.ndarray
    angle_mask: tuple[bool, ...]
    method: str
    dt: float
    iterations: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.x[:, self.names.index(name)]

    def wrapped(self) -> np.ndarray:
        out = self.x.copy()
        mask = np.array(self.angle_mask)
        out[:, mask] = np.mod(out[:, mask], TWO_PI)
        return out

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


# -- compiled fields ----------------------------------------------------------


def _scalar_function(exprs: Sequence[PolyExpr], names: Sequence[str]):
    import sympy as sp

    syms = [sp.Symbol(n, real=True) for n in names]
    table = dict(zip(names, syms))
    fn = sp.lambdify(syms, [e.to_sympy(table) for e in exprs], modules="math", cse=True)
    return lambda x: np.array(fn(*x), dtype=float)


class CompiledSystem:
    """Float evaluators for one system: the field (single state and batched)
    and, for Hamiltonian kinds, the per-pair conserved quantities."""

    def __init__(self, system: SystemModel):
        self.system = system
        self.names = system.names
        self.field = _scalar_function(system.vector_field, system.names)
        self._batch = None
        self.angle_mask = np.array(system.angle_mask)
        self.u_idx = system.index("u")
        self.phi_idx = system.index("phi")
        self.p_idx = system.index("p")
        self.q_idx = system.index("q")
        self.pairs = []
        if system.kind.hamiltonian:
            for v, g in enumerate(pair_invariants(system)):
                grad = [g.derivative(n) if n in g.variables else PolyExpr.zero() for n in (f"p{v + 1}", f"q{v + 1}")]
                self.pairs.append(
                    (self.p_idx[v], self.q_idx[v], _scalar_function([g], system.names), _scalar_function(grad, system.names))
                )

    @property
    def batch_field(self):
        if self._batch is None:
            self._batch = compile_numeric(self.system.vector_field, self.names)
        return self._batch


def pair_invariants(system: SystemModel) -> list[PolyExpr]:
    """Conserved function of each (p_v, q_v) pair, u treated as a constant.

    The first pair carries the coupling term l p~_1 sum zeta u~^2.
    """
    from .systems import _tilde

    params = system.params
    d = params.dims
    c = system.kind.compact
    out = []
    for v in range(d.l):
        pt, qt = _tilde(f"p{v + 1}", c), _tilde(f"q{v + 1}", c)
        g = pt * qt**2 * params.xi[v] + pt**3 * params.eta[v] / 3
        if v == 0:
            pull = PolyExpr.zero()
            for i in range(d.s):
                pull = pull + _tilde(f"u{i + 1}", c) ** 2 * params.zeta[i]
            g = g + pt * pull * d.l
        out.append(g.with_variables(system.variables))
    return out


_COMPILED: dict[int, CompiledSystem] = {}


def compiled(system: SystemModel) -> CompiledSystem:
    key = id(system)
    hit = _COMPILED.get(key)
    if hit is None or hit.system is not system:
        hit = CompiledSystem(system)
        _COMPILED[key] = hit
    return hit


# -- single-trajectory integrators ------------------------------------------------


def _rk4(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _midpoint(f, x, dt, tol, max_iter):
    y = x + dt * f(x)
    for it in range(1, max_iter + 1):
        y_new = x + dt * f(0.5 * (x + y))
        if not np.all(np.isfinite(y_new)):
            raise NoConvergence("implicit midpoint iterate is not finite")
        delta = np.max(np.abs(y_new - y)) if y.size else 0.0
        y = y_new
        if delta <= tol * max(1.0, np.max(np.abs(y)) if y.size else 1.0):
            return y, it
    raise NoConvergence(f"implicit midpoint fixed point did not converge in {max_iter} iterations (tol {tol})")


def _project_pairs(cs: CompiledSystem, x: np.ndarray, targets: list[float]) -> np.ndarray:
    for (ip, iq, g, grad), g0 in zip(cs.pairs, targets):
        for _ in range(3):
            r = g(x)[0] - g0
            gr = grad(x)
            norm2 = gr[0] ** 2 + gr[1] ** 2
            if norm2 < 1e-300 or r == 0.0:
                break
            x[ip] -= r * gr[0] / norm2
            x[iq] -= r * gr[1] / norm2
    return x


def _check_step(cs: CompiledSystem, x: np.ndarray, dt: float) -> None:
    rate = np.abs(cs.field(x))[cs.angle_mask]
    if rate.size and dt * float(np.max(rate)) >= math.pi:
        raise StepTooLarge(
            f"dt = {dt} advances an angle by {dt * float(np.max(rate)):.3g} >= pi per step; reduce dt"
        )


def integrate(system: SystemModel, start: State | Sequence[float], config: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    cs = compiled(system)
    x = np.array(start.values if isinstance(start, State) else start, dtype=float)
    if x.shape != (len(system.names),):
        raise ValueError(f"start needs {len(system.names)} entries, got shape {x.shape}")
    dt, steps, every = config.dt, config.steps, config.sample_every
    _check_step(cs, x, dt)
    f = cs.field
    ts = [0.0]
    xs = [x.copy()]
    iters: list[int] = []
    targets = [g(x)[0] for _, _, g, _ in cs.pairs] if config.method == "exact-split" else []
    h = dt / config.substeps
    u_idx = cs.u_idx
    for step in range(1, steps + 1):
        if config.method == "rk4":
            x = _rk4(f, x, dt)
        elif config.method == "midpoint":
            x, it = _midpoint(f, x, dt, config.tol, config.max_iter)
            iters.append(it)
        else:
            u = x[u_idx].copy()
            for _ in range(config.substeps):
                x = _rk4(f, x, h)
            x[u_idx] = u
            x = _project_pairs(cs, x, targets)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > config.blowup:
            traj = _make_traj(system, ts, xs, config, iters)
            t_now = step * dt
            raise BlowUp(
                f"state norm exceeded {config.blowup:g} at t = {t_now:.6g} (finite-time escape)",
                traj,
                t_now,
            )
        if step % every == 0 or step == steps:
            ts.append(step * dt)
            xs.append(x.copy())
    return _make_traj(system, ts, xs, config, iters)


def _make_traj(system, ts, xs, config: IntegratorConfig, iters) -> Trajectory:
    return Trajectory(
        system.names,
        np.array(ts),
        np.array(xs),
        system.angle_mask,
        config.method,
        config.dt,
        np.array(iters, dtype=int) if iters else None,
        {"config": asdict(config)},
    )


def integrate_batch(system: SystemModel, starts: np.ndarray, config: IntegratorConfig = IntegratorConfig(), observer=None):
    """RK4 on many starts at once; starts has shape (count, dim).

    A sample whose state leaves the finite region |x| <= blowup is frozen
    at its last finite state and reported in the returned mask.
    ``observer(x)`` is called with the (dim, count) array after every step.
    """
    cs = compiled(system)
    f = cs.batch_field
    x = np.array(starts, dtype=float).T.copy()
    blown = np.zeros(x.shape[1], dtype=bool)
    dt = config.dt
    if observer is not None:
        observer(x, blown)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.steps):
            y = _rk4(f, x, dt)
            bad = ~np.all(np.isfinite(y), axis=0) | (np.max(np.abs(y), axis=0) > config.blowup)
            blown |= bad
            x[:, ~blown] = y[:, ~blown]
            if observer is not None:
                observer(x, blown)
    return x.T, blown


# -- diagnostics --------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyEstimate:
    omega: np.ndarray
    residual: float
    names: tuple[str, ...]


def estimate_frequencies(traj: Trajectory, angle_indices: Sequence[int] | None = None, threshold: float = 1e-6) -> FrequencyEstimate:
    """Least-squares slopes of the unwrapped angle columns against time.

    ``residual`` is the largest RMS deviation from the fitted line; above
    ``threshold`` the motion is not a linear flow and NotLinear is raised.
    """
    if angle_indices is None:
        angle_indices = [i for i, n in enumerate(traj.names) if n.startswith("phi")]
    t = traj.t
    if len(t) < 2:
        raise ValueError("need at least two samples")
    cols = traj.x[:, list(angle_indices)]
    if not np.all(np.isfinite(cols)):
        raise NotLinear("trajectory contains non-finite values")
    tc = t - t.mean()
    denom = float(tc @ tc)
    slopes = (tc @ (cols - cols.mean(axis=0))) / denom
    fit = cols.mean(axis=0) + np.outer(tc, slopes)
    rms = np.sqrt(np.mean((cols - fit) ** 2, axis=0))
    worst = float(rms.max(initial=0.0))
    names = tuple(traj.names[i] for i in angle_indices)
    if worst > threshold:
        raise NotLinear(f"angle residual {worst:.3g} exceeds {threshold:g}: not a linear flow")
    return FrequencyEstimate(slopes, worst, names)


def winding_frequency(traj: Trajectory, name: str) -> float:
    """Mean rate of an unwrapped angle over whole turns (for non-uniform rotation)."""
    col = traj.column(name)
    turns = np.floor((col - col[0]) / TWO_PI)
    k = int(turns[-1])
    if k < 1:
        raise ValueError(f"{name} completed no full turn")
    first = int(np.argmax(turns >= k))
    # interpolate the crossing time between the bracketing samples
    target = col[0] + k * TWO_PI
    t0, t1 = traj.t[first - 1], traj.t[first]
    c0, c1 = col[first - 1], col[first]
    t_cross = t0 + (target - c0) * (t1 - t0) / (c1 - c0)
    return k * TWO_PI / float(t_cross - traj.t[0])


@dataclass(frozen=True)
class PeriodMeasurement:
    l: int
    chi: float
    xi1: float
    measured: float
    closed_form: float
    periods: int

    @property
    def relative_error(self) -> float:
        return abs(self.measured - self.closed_form) / self.closed_form


def exceptional_frequency(l: int, chi: float, xi1: float) -> float:
    lc = l * chi
    return math.sqrt(lc * (lc + xi1))


def measure_exceptional_period(l: int, chi: float, xi1: float, periods: int = 20, rtol: float = 1e-12) -> PeriodMeasurement:
    """Integrate dq/dt = xi1 sin^2 q + l chi through ``periods`` full turns
    and convert the mean turn time to a frequency."""
    if l < 1 or not chi > 0 or xi1 < 0:
        raise ValueError("need l >= 1, chi > 0, xi1 >= 0")
    lc = l * chi
    target = periods * TWO_PI

    def rhs(_t, y):
        s = math.sin(y[0])
        return [xi1 * s * s + lc]

    def done(_t, y):
        return y[0] - target

    done.terminal = True
    done.direction = 1
    # slowest speed is l chi, so the run ends before this bound
    t_max = 1.5 * target / lc
    sol = solve_ivp(rhs, (0.0, t_max), [0.0], method="DOP853", rtol=rtol, atol=1e-14, events=done)
    if not sol.t_events[0].size:
        raise RuntimeError("wrap event not reached")
    t_end = float(sol.t_events[0][0])
    return PeriodMeasurement(l, chi, xi1, target / t_end, exceptional_frequency(l, chi, xi1), periods)


@dataclass(frozen=True)
class RecurrenceQuery:
    omega: tuple[float, ...]
    T: float
    eps: float
    max_multiples: int = 10_000_000


@dataclass(frozen=True)
class RecurrenceResult:
    theta: float
    m1: int
    m2: int
    distance: float
    delta: float


def torus_distance(x: np.ndarray) -> float:
    """l1 distance of x from 0 on the torus R^n / (2 pi Z)^n."""
    r = np.mod(np.asarray(x, dtype=float), TWO_PI)
    return float(np.sum(np.minimum(r, TWO_PI - r)))


def find_recurrence_time(query: RecurrenceQuery) -> RecurrenceResult:
    """Pigeonhole scan over the multiples m T.

    Each point m T omega mod 2 pi is dropped into a cell of side
    delta = eps / n; two multiples in one cell differ by less than eps in
    the l1 metric.  Multiples already within eps of the origin are accepted
    directly (m1 = 0).
    """
    omega = np.asarray(query.omega, dtype=float)
    if not query.T > 0 or not query.eps > 0:
        raise ValueError("T and eps must be positive")
    n = max(len(omega), 1)
    delta = query.eps / n
    seen: dict[tuple[int, ...], int] = {}
    chunk = 4096
    for lo in range(1, query.max_multiples + 1, chunk):
        ms = np.arange(lo, min(lo + chunk, query.max_multiples + 1))
        pos = np.mod(np.outer(ms * query.T, omega), TWO_PI)
        dist = np.sum(np.minimum(pos, TWO_PI - pos), axis=1)
        cells = np.floor(pos / delta).astype(np.int64).tolist()
        for m, d, cell in zip(ms.tolist(), dist.tolist(), cells):
            if d < query.eps:
                res = _recurrence(query, 0, m, delta)
                if res is not None:
                    return res
            key = tuple(cell)
            m1 = seen.get(key)
            if m1 is not None:
                res = _recurrence(query, m1, m, delta)
                if res is not None:
                    return res
            seen[key] = m
    raise BudgetExceeded(f"scan cap of {query.max_multiples} multiples reached before a recurrence was found")


def _recurrence(query: RecurrenceQuery, m1: int, m2: int, delta: float) -> RecurrenceResult | None:
    theta = (m2 - m1) * query.T
    dist = torus_distance(theta * np.asarray(query.omega, dtype=float))
    if dist >= query.eps:
        # rounding in the cell assignment; keep scanning
        return None
    assert theta >= query.T and dist < query.eps
    return RecurrenceResult(theta, m1, m2, dist, delta)


# -- escape detection -------------------------------------------------------------

ESCAPES, STATIONARY, INCONCLUSIVE = "escapes", "stationary", "inconclusive"


class EscapeMonitor:
    """Online monotone-escape test for a batch of trajectories.

    Feed states of shape (dim, count); ``signs`` orients each monitored
    coordinate (+1: expect increase).  With a domain, a sample stops being
    watched the moment it leaves the domain, and then cannot be certified.
    """

    def __init__(self, indices: Sequence[int], signs: Sequence[int] | None = None, delta: float = 1e-6,
                 stationary_tol: float = 1e-10, slack: float = 1e-12, domain=None):
        self.indices = list(indices)
        self.signs = np.asarray(signs if signs is not None else [1] * len(self.indices), dtype=float)[:, None]
        self.delta = delta
        self.stationary_tol = stationary_tol
        self.slack = slack
        self.domain = domain
        self.first = None

    def __call__(self, x: np.ndarray, frozen: np.ndarray | None = None) -> None:
        y = self.signs * x[self.indices]
        if self.first is None:
            count = x.shape[1]
            self.first = y.copy()
            self.last = y.copy()
            self.monotone = np.ones(y.shape, dtype=bool)
            self.spread = np.zeros(count)
            self.left = np.zeros(count, dtype=bool)
            self.x0 = x.copy()
            if self.domain is not None:
                self.left |= ~self.domain.contains_batch(x)
            return
        live = ~self.left
        if frozen is not None:
            live &= ~frozen
        if self.domain is not None:
            out = ~self.domain.path_inside(self.x0, x)
            self.left |= out & live
            live &= ~out
        if not live.any():
            return
        ys = y[:, live]
        self.monotone[:, live] &= ys >= self.last[:, live] - self.slack * np.maximum(1.0, np.abs(self.last[:, live]))
        self.spread[live] = np.maximum(self.spread[live], np.max(np.abs(ys - self.first[:, live]), axis=0))
        self.last[:, live] = ys

    def verdicts(self) -> list[str]:
        rise = self.last - self.first
        out = []
        for j in range(self.first.shape[1]):
            if self.left[j]:
                out.append(INCONCLUSIVE)
            elif np.any(self.monotone[:, j] & (rise[:, j] > self.delta)):
                out.append(ESCAPES)
            elif self.spread[j] <= self.stationary_tol:
                out.append(STATIONARY)
            else:
                out.append(INCONCLUSIVE)
        return out


def monotone_escape_detector(traj: Trajectory, coord_indices: Sequence[int], signs: Sequence[int] | None = None,
                             delta: float = 1e-6, stationary_tol: float = 1e-10, domain=None) -> str:
    mon = EscapeMonitor(coord_indices, signs, delta, stationary_tol, domain=domain)
    for row in traj.x:
        if not np.all(np.isfinite(row)):
            break
        mon(row[:, None])
    return mon.verdicts()[0]


# -- convergence and I/O -------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceStudy:
    method: str
    dts: tuple[float, ...]
    errors: tuple[float, ...]

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(a / b for a, b in zip(self.errors, self.errors[1:]))


def self_convergence(system: SystemModel, start, method: str, dt: float, T: float, levels: int = 2, ref_factor: int = 16) -> ConvergenceStudy:
    """Final-state errors at dt, dt/2, ... against a run at dt / ref_factor."""
    ref = integrate(system, start, IntegratorConfig(method=method, dt=dt / ref_factor, T=T, sample_every=10**9))
    dts, errs = [], []
    for j in range(levels):
        h = dt / 2**j
        run = integrate(system, start, IntegratorConfig(method=method, dt=h, T=T, sample_every=10**9))
        dts.append(h)
        errs.append(float(np.max(np.abs(run.final - ref.final))))
    return ConvergenceStudy(method, tuple(dts), tuple(errs))


def write_csv(traj: Trajectory, path, diagnostic: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *traj.names])
        for t, row in zip(traj.t, traj.x):
            w.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in row)])
        if diagnostic:
            fh.write(f"# diagnostic: {diagnostic}\n")


def write_sidecar(path, document: dict, config: dict, diagnostics: dict) -> None:
    with open(path, "w") as fh:
        json.dump({"system": document, "config": config, "diagnostics": diagnostics}, fh, indent=2, default=str)
