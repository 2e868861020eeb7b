"""Fixed-step closed-loop simulation of plant + controller through a timeline.

Between events the closed loop is affine, dx/dt = A x + b, with A and b
probed from the same derivative function that ``step`` integrates. A single
classical RK4 step is therefore the matrix polynomial

    x+ = P x + q,  P = I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24,

and ``run`` advances whole sample intervals with powers of the augmented
``[[P, q], [0, 1]]``. This is the same RK4 recurrence, just evaluated in
bulk; ``tests/test_sim.py`` checks it against stepping one step at a time.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import deviations
from .control import Controller
from .errors import DisconnectedGraph, NonpositiveReference, NotSettled, NumericalBlowup
from .plant import PlantState, plant_derivatives

log = logging.getLogger(__name__)

BLOWUP = 1e9


@dataclass(frozen=True)
class _Layout:
    n: int
    m: int

    @property
    def size(self):
        return self.m + 5 * self.n

    def slices(self):
        n, m = self.n, self.m
        return (
            slice(0, m),
            slice(m, m + n),
            slice(m + n, m + 2 * n),
            slice(m + 2 * n, m + 3 * n),
            slice(m + 3 * n, m + 4 * n),
            slice(m + 4 * n, m + 5 * n),
        )


def pack(plant, ctrl):
    return np.concatenate([plant.i_line, plant.i_conv, plant.v_bus, ctrl.delta_i, ctrl.delta_v, ctrl.v_est])


def unpack(x, layout, ctrl):
    s = layout.slices()
    plant = PlantState(x[s[0]].copy(), x[s[1]].copy(), x[s[2]].copy())
    return plant, replace(ctrl, delta_i=x[s[3]].copy(), delta_v=x[s[4]].copy(), v_est=x[s[5]].copy())


def closed_loop_derivative(x, net, controller, ctrl, layout):
    """Derivative of the packed state with the discrete controller context ``ctrl``."""
    plant, c = unpack(x, layout, ctrl)
    u = controller.output(c, plant.i_conv)
    dp = plant_derivatives(net, plant, u, connected=ctrl.plugged)
    d_di, d_dv, d_est = controller.derivatives(c, plant.i_conv, dp.v_bus)
    return np.concatenate([dp.i_line, dp.i_conv, dp.v_bus, d_di, d_dv, d_est])


def _check(x, t):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP:
        raise NumericalBlowup("state magnitude exceeded 1e9", t=t)


def rk4(f, x, h):
    """Classical fourth-order Runge-Kutta step of dx/dt = f(x)."""
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def step(plant, ctrl, dt, net, controller, t=None):
    """One RK4 step of the closed loop; relays are re-solved at every stage."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    layout = _Layout(net.n_bus, net.n_line)
    x = rk4(lambda y: closed_loop_derivative(y, net, controller, ctrl, layout), pack(plant, ctrl), dt)
    _check(x, t)
    return unpack(x, layout, ctrl)


def affine_field(net, controller, ctrl):
    """``(A, b)`` with dx/dt = A x + b for the current discrete context."""
    layout = _Layout(net.n_bus, net.n_line)
    size = layout.size
    b = closed_loop_derivative(np.zeros(size), net, controller, ctrl, layout)
    a = np.empty((size, size))
    eye = np.eye(size)
    for j in range(size):
        a[:, j] = closed_loop_derivative(eye[j], net, controller, ctrl, layout) - b
    return a, b


def rk4_map(a, b, h):
    """Augmented one-step RK4 matrix for dx/dt = A x + b."""
    size = a.shape[0]
    ha = h * a
    eye = np.eye(size)
    ha2 = ha @ ha
    ha3 = ha2 @ ha
    p = eye + ha + ha2 / 2.0 + ha3 / 6.0 + ha3 @ ha / 24.0
    q = h * (eye + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0) @ b
    out = np.zeros((size + 1, size + 1))
    out[:size, :size] = p
    out[:size, size] = q
    out[size, size] = 1.0
    return out


@dataclass
class PhaseSummary:
    start: float
    end: float
    theta: float
    omega: float
    plugged: np.ndarray
    v: np.ndarray
    i: np.ndarray
    i_pu: np.ndarray
    report: object
    critical_report: object
    ordinary_report: object
    settled: bool
    max_rate: float

    def as_dict(self):
        def rep(r):
            return {"delta_v": r.delta_v.tolist(), "delta_i": r.delta_i.tolist(), "mvdr": r.mvdr, "mcdr": r.mcdr}

        return {
            "start": self.start,
            "end": self.end,
            "theta": self.theta,
            "omega": self.omega,
            "plugged": self.plugged.tolist(),
            "settled": self.settled,
            "max_rate": self.max_rate,
            "v": self.v.tolist(),
            "i": self.i.tolist(),
            "i_pu": self.i_pu.tolist(),
            "all": rep(self.report),
            "critical": rep(self.critical_report),
            "ordinary": rep(self.ordinary_report),
        }


@dataclass
class SimulationTrace:
    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    i_pu: np.ndarray
    est: np.ndarray
    delta_i: np.ndarray
    delta_v: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    phases: list = field(default_factory=list)

    def csv_header(self):
        n = self.v.shape[1]
        cols = ["t"]
        for name in ("V", "I", "Ipu", "est"):
            cols += [f"{name}_{k + 1}" for k in range(n)]
        return cols + ["theta", "omega"]

    def rows(self):
        return np.column_stack([self.t, self.v, self.i, self.i_pu, self.est, self.theta, self.omega])

    def write_csv(self, path):
        np.savetxt(path, self.rows(), delimiter=",", header=",".join(self.csv_header()), comments="", fmt="%.10g")


class Simulator:
    """Owns the mutable plant/controller state for one scenario run."""

    def __init__(self, model, mode, theta, omega, dt=1e-6, settle_window=0.2, settle_tol=1e-6, refresh_ib1=True):
        self.model = model
        self.net = model.net
        self.controller = Controller(model, mode, refresh_ib1=refresh_ib1)
        self.dt = dt
        self.settle_window = settle_window
        self.settle_tol = settle_tol
        self.layout = _Layout(self.net.n_bus, self.net.n_line)
        self.plant = PlantState.cold(self.net, model.v_rat)
        self.ctrl = self.controller.initial_state(self.plant.v_bus, theta, omega)
        self.t = 0.0
        self._x = pack(self.plant, self.ctrl)
        self._field = None
        self._maps = {}
        s = self.layout.slices()
        i_scale = float(np.max(model.ratings.current_capacity))
        self._scale = np.full(self.layout.size, model.v_rat)
        self._scale[s[0]] = i_scale
        self._scale[s[1]] = i_scale

    # -- discrete context --------------------------------------------------------

    def _invalidate(self):
        self._field = None
        self._maps = {}

    def field(self):
        if self._field is None:
            self._field = affine_field(self.net, self.controller, self.ctrl)
        return self._field

    def apply(self, event):
        self._sync()
        try:
            if event.kind == "set_load":
                g = 0.0 if np.isinf(event.value) else 1.0 / event.value
                self.net = self.net.with_load(event.node, g)
            elif event.kind == "unplug_dg":
                self._x[self.layout.slices()[1]][event.node] = 0.0
            self.ctrl = self.controller.apply_event(self.ctrl, event, self.plant.v_bus)
        except (DisconnectedGraph, NonpositiveReference) as exc:
            raise type(exc)(str(exc), t=self.t) from None
        if event.kind in ("unplug_dg", "plug_dg"):
            self._x[self.layout.slices()[5]] = self.plant.v_bus
        self._invalidate()
        log.debug("t=%.6g applied %s", self.t, event)

    # -- stepping ----------------------------------------------------------------

    def _sync(self):
        self.plant, self.ctrl = unpack(self._x, self.layout, self.ctrl)

    def advance(self, duration):
        """Integrate for ``duration`` seconds on an equal-step grid no coarser than dt."""
        if duration <= 0:
            return
        nsteps = max(1, int(np.ceil(duration / self.dt - 1e-9)))
        h = duration / nsteps
        key = (nsteps, round(h, 18))
        m = self._maps.get(key)
        if m is None:
            a, b = self.field()
            with np.errstate(over="ignore", invalid="ignore"):
                m = np.linalg.matrix_power(rk4_map(a, b, h), nsteps)
            self._maps[key] = m
        size = self.layout.size
        with np.errstate(over="ignore", invalid="ignore"):
            self._x = m[:size, :size] @ self._x + m[:size, size]
        self.t += duration
        _check(self._x, self.t)

    def rate(self):
        """Largest scaled state derivative magnitude (1/s)."""
        a, b = self.field()
        return float(np.max(np.abs(a @ self._x + b) / self._scale))

    def sample(self):
        self._sync()
        est = self.controller.relayed_estimates(self.ctrl)
        i = self.plant.i_conv
        return (
            self.t,
            self.plant.v_bus.copy(),
            i.copy(),
            i / self.model.ratings.current_capacity,
            est,
            self.ctrl.delta_i.copy(),
            self.ctrl.delta_v.copy(),
            self.ctrl.theta,
            self.ctrl.omega,
        )

    def summary(self, start, rates):
        self._sync()
        window = [r for (t, r) in rates if t >= self.t - self.settle_window - 1e-12]
        max_rate = max(window) if window else self.rate()
        plugged = self.ctrl.plugged.copy()
        v, i = self.plant.v_bus.copy(), self.plant.i_conv.copy()
        cap = self.model.ratings.current_capacity
        v_rat = self.model.v_rat
        crit = np.array(self.model.partition.critical, dtype=int)
        ordn = np.array(self.model.partition.ordinary, dtype=int)
        all_dg = np.flatnonzero(plugged)
        return PhaseSummary(
            start=start,
            end=self.t,
            theta=self.ctrl.theta,
            omega=self.ctrl.omega,
            plugged=plugged,
            v=v,
            i=i,
            i_pu=i / cap,
            report=deviations(v, i, cap, v_rat, dgs=all_dg),
            critical_report=deviations(v, i, cap, v_rat, buses=crit, dgs=crit[plugged[crit]]),
            ordinary_report=deviations(v, i, cap, v_rat, buses=ordn, dgs=ordn[plugged[ordn]]),
            settled=bool(max_rate < self.settle_tol),
            max_rate=float(max_rate),
        )


def _grid(duration, sample_interval, event_times):
    k = int(np.floor(duration / sample_interval + 1e-9))
    samples = [j * sample_interval for j in range(k + 1)]
    if duration - samples[-1] > 1e-9 * sample_interval:
        samples.append(duration)
    return samples


def run(spec, refresh_ib1=True):
    """Execute a scenario; returns a SimulationTrace with per-phase summaries.

    With ``spec.startup > 0`` the cold start is integrated for that long
    before t=0 and those samples are discarded.
    """
    sim = Simulator(
        spec.model,
        spec.mode,
        spec.theta,
        spec.omega,
        dt=spec.dt,
        settle_window=spec.settle_window,
        settle_tol=spec.settle_tol,
        refresh_ib1=refresh_ib1,
    )
    if spec.startup > 0:
        # pre-roll with the initial settings; t=0 marks the end of startup
        sim.advance(spec.startup)
        sim.t = 0.0
    events = list(spec.timeline)
    samples = _grid(spec.duration, spec.sample_interval, [t for t, _ in events])
    marks = sorted(set(samples) | {t for t, _ in events})
    records = []
    rates = []
    phases = []
    phase_start = 0.0
    ev_idx = 0
    for j, t_mark in enumerate(marks):
        if j > 0:
            sim.advance(t_mark - sim.t)
            sim.t = t_mark
        rates.append((sim.t, sim.rate()))
        if t_mark in samples or np.isclose(samples, t_mark, rtol=0, atol=1e-12).any():
            records.append(sim.sample())
        while ev_idx < len(events) and np.isclose(events[ev_idx][0], t_mark, rtol=0, atol=1e-12):
            phases.append(sim.summary(phase_start, rates))
            sim.apply(events[ev_idx][1])
            rates = [(sim.t, sim.rate())]
            phase_start = sim.t
            ev_idx += 1
    phases.append(sim.summary(phase_start, rates))
    cols = list(zip(*records))
    return SimulationTrace(
        t=np.array(cols[0]),
        v=np.array(cols[1]),
        i=np.array(cols[2]),
        i_pu=np.array(cols[3]),
        est=np.array(cols[4]),
        delta_i=np.array(cols[5]),
        delta_v=np.array(cols[6]),
        theta=np.array(cols[7]),
        omega=np.array(cols[8]),
        phases=phases,
    )


def settle(model, theta, omega, mode, dt=1e-6, horizon=10.0, check_every=0.05, window=0.2, tol=1e-6, refresh_ib1=True):
    """Simulate from a cold start until settled; returns the PhaseSummary.

    Raises NotSettled if the scaled derivative has not stayed below ``tol``
    for ``window`` seconds by ``horizon``.
    """
    sim = Simulator(model, mode, theta, omega, dt=dt, settle_window=window, settle_tol=tol, refresh_ib1=refresh_ib1)
    rates = [(0.0, sim.rate())]
    calm_since = None
    while sim.t < horizon - 1e-12:
        sim.advance(min(check_every, horizon - sim.t))
        r = sim.rate()
        rates.append((sim.t, r))
        if r < tol:
            calm_since = sim.t if calm_since is None else calm_since
            if sim.t - calm_since >= window - 1e-12:
                return sim.summary(0.0, rates)
        else:
            calm_since = None
    raise NotSettled(f"rate {rates[-1][1]:.3g}/s still above {tol:g}/s", t=sim.t)
