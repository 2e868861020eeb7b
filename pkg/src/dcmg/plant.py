"""Electrical plant: lines, LC filters, resistive loads, admittance algebra."""
from dataclasses import dataclass, replace

import numpy as np

from .errors import DanglingReference, GraphNotConnected, ModelValidationError, NonpositiveParameter, SingularSystem
from .linalg import solve
from .topology import CommGraph, NodePartition, is_connected


def _vec(x, n, name, positive=True, allow_zero=False):
    v = np.array(x, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise ModelValidationError(f"{name}: expected {n} entries, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ModelValidationError(f"{name}: entries must be finite")
    if positive:
        bad = v < 0 if allow_zero else v <= 0
        if np.any(bad):
            kind = "nonnegative" if allow_zero else "positive"
            raise NonpositiveParameter(f"{name}: entries must be {kind}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class ElectricalNetwork:
    incidence: np.ndarray
    line_resistance: np.ndarray
    line_inductance: np.ndarray
    load_conductance: np.ndarray
    filter_inductance: np.ndarray
    filter_capacitance: np.ndarray

    def __post_init__(self):
        b = np.array(self.incidence, dtype=float)
        if b.ndim != 2:
            raise ModelValidationError("incidence must be a matrix")
        n, m = b.shape
        for k in range(m):
            col = b[:, k]
            if not (np.sum(col == 1) == 1 and np.sum(col == -1) == 1 and np.sum(col != 0) == 2):
                raise ModelValidationError(f"line {k}: incidence column needs exactly one +1 and one -1")
        b.setflags(write=False)
        object.__setattr__(self, "incidence", b)
        object.__setattr__(self, "line_resistance", _vec(self.line_resistance, m, "line_resistance"))
        object.__setattr__(self, "line_inductance", _vec(self.line_inductance, m, "line_inductance"))
        object.__setattr__(self, "load_conductance", _vec(self.load_conductance, n, "load_conductance", allow_zero=True))
        object.__setattr__(self, "filter_inductance", _vec(self.filter_inductance, n, "filter_inductance"))
        object.__setattr__(self, "filter_capacitance", _vec(self.filter_capacitance, n, "filter_capacitance"))
        adj = np.abs(b) @ np.abs(b).T
        np.fill_diagonal(adj, 0)
        if n > 1 and not is_connected(CommGraph((adj > 0).astype(float))):
            raise GraphNotConnected("electrical network is not connected")

    @classmethod
    def from_lines(cls, n_bus, lines, load_conductance, filter_inductance, filter_capacitance):
        """``lines`` holds ``(from, to, resistance, inductance)`` with 0-based buses."""
        b = np.zeros((n_bus, len(lines)))
        r, l = [], []
        for k, (i, j, res, ind) in enumerate(lines):
            if not (0 <= i < n_bus and 0 <= j < n_bus):
                raise DanglingReference(f"line {k}: endpoint outside 0..{n_bus - 1}")
            if i == j:
                raise ModelValidationError(f"line {k}: invalid endpoints ({i}, {j})")
            b[i, k] = 1.0
            b[j, k] = -1.0
            r.append(res)
            l.append(ind)
        return cls(b, r, l, load_conductance, filter_inductance, filter_capacitance)

    @property
    def n_bus(self):
        return self.incidence.shape[0]

    @property
    def n_line(self):
        return self.incidence.shape[1]

    def with_load(self, bus, conductance):
        g = self.load_conductance.copy()
        g[bus] = conductance
        return replace(self, load_conductance=g)


@dataclass(frozen=True)
class DGRatings:
    current_capacity: np.ndarray
    droop_coefficient: np.ndarray
    rated_voltage: float

    def __post_init__(self):
        n = np.size(self.current_capacity)
        object.__setattr__(self, "current_capacity", _vec(self.current_capacity, n, "current_capacity"))
        object.__setattr__(self, "droop_coefficient", _vec(self.droop_coefficient, n, "droop_coefficient"))
        if not (np.isfinite(self.rated_voltage) and self.rated_voltage > 0):
            raise NonpositiveParameter("rated_voltage must be positive")
        object.__setattr__(self, "rated_voltage", float(self.rated_voltage))

    @classmethod
    def rating_inverse(cls, current_capacity, rated_voltage, ratio=0.05):
        """Droop r_i = ratio * V_rat / I*_i."""
        cap = np.asarray(current_capacity, dtype=float)
        return cls(cap, ratio * rated_voltage / cap, rated_voltage)


@dataclass(frozen=True)
class PartitionedAdmittance:
    partition: NodePartition
    y_bus: np.ndarray
    y_bar: np.ndarray
    y11: np.ndarray
    y12: np.ndarray
    y21: np.ndarray
    y22: np.ndarray
    schur_ord: np.ndarray
    schur_cri: np.ndarray

    @property
    def critical(self):
        return np.array(self.partition.critical, dtype=int)

    @property
    def ordinary(self):
        return np.array(self.partition.ordinary, dtype=int)


@dataclass
class PlantState:
    i_line: np.ndarray
    i_conv: np.ndarray
    v_bus: np.ndarray

    @classmethod
    def cold(cls, net, v0):
        """Unexcited start: all currents zero, every bus at ``v0``."""
        return cls(np.zeros(net.n_line), np.zeros(net.n_bus), np.full(net.n_bus, float(v0)))


def bus_admittance(net):
    """Y = B R_l^-1 B^T (line conductances, not resistances)."""
    b = net.incidence
    return b @ np.diag(1.0 / net.line_resistance) @ b.T


def load_augmented(net):
    return bus_admittance(net) + np.diag(net.load_conductance)


def partitioned_admittance(net, part):
    y = bus_admittance(net)
    yb = y + np.diag(net.load_conductance)
    c = np.array(part.critical, dtype=int)
    o = np.array(part.ordinary, dtype=int)
    y11 = yb[np.ix_(c, c)]
    y12 = yb[np.ix_(c, o)]
    y21 = yb[np.ix_(o, c)]
    y22 = yb[np.ix_(o, o)]
    if o.size:
        schur_ord = y11 - y12 @ solve(y22, y21, "Ybar22")
        schur_cri = y22 - y21 @ solve(y11, y12, "Ybar11")
    else:
        solve(y11, np.zeros(len(c)), "Ybar11")
        schur_ord = y11.copy()
        schur_cri = np.zeros((0, 0))
    return PartitionedAdmittance(part, y, yb, y11, y12, y21, y22, schur_ord, schur_cri)


def plant_derivatives(net, state, v_t, connected=None):
    """Time derivatives of line currents, converter currents and bus voltages.

    ``connected`` masks DGs that are plugged in; an unplugged DG's current has
    zero derivative (the caller keeps it at zero).
    """
    b = net.incidence
    v = state.v_bus
    d_line = (b.T @ v - net.line_resistance * state.i_line) / net.line_inductance
    d_conv = (np.asarray(v_t, dtype=float) - v) / net.filter_inductance
    if connected is not None:
        d_conv = np.where(connected, d_conv, 0.0)
    d_v = (state.i_conv - net.load_conductance * v - b @ state.i_line) / net.filter_capacitance
    return PlantState(d_line, d_conv, d_v)


def stored_energy(net, state):
    return 0.5 * (
        np.sum(net.line_inductance * state.i_line**2)
        + np.sum(net.filter_inductance * state.i_conv**2)
        + np.sum(net.filter_capacitance * state.v_bus**2)
    )


def steady_state_oracle(net, ratings, reference_currents, mode, partition=None, present=None):
    """Brute-force steady state: solve I = alpha*I_ref, I = Ybar V plus a balancing row.

    ``mode`` is ``"uniform"`` (mean of all bus voltages equals V_rat) or
    ``"critical"`` (mean over ``partition.critical``). DGs with
    ``present[i] == False`` inject nothing. Returns ``(V, I, alpha)``.
    """
    n = net.n_bus
    iref = np.asarray(reference_currents, dtype=float)
    if present is None:
        present = np.ones(n, dtype=bool)
    iref = np.where(present, iref, 0.0)
    if mode == "uniform":
        buses = np.arange(n)
    elif mode == "critical":
        if partition is None:
            raise ValueError("critical mode needs a partition")
        buses = np.array(partition.critical, dtype=int)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    a = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    a[:n, :n] = load_augmented(net)
    a[:n, n] = -iref
    a[n, buses] = 1.0 / len(buses)
    rhs[n] = ratings.rated_voltage
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= 1e-13 * sv[0]:
        raise SingularSystem("augmented steady-state system is rank deficient")
    x = np.linalg.solve(a, rhs)
    v, alpha = x[:n], x[n]
    return v, alpha * iref, alpha
