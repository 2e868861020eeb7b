"""Distributed droop + secondary controllers and average-voltage observers.

Two modes share one implementation:

* ``uniform`` - every node regulates voltage through the dynamic average
  consensus observer and shares current with compromised references.
* ``critical`` - only critical nodes run the observer and the voltage
  integrator; ordinary nodes relay estimates algebraically and share current
  against their capacities.

An unplugged DG keeps its integrators frozen. With ``relay=True`` its node
stays in the communication graph as an algebraic relay (like an ordinary
node in the observer); otherwise its links are dropped.
"""
from dataclasses import dataclass, replace

import numpy as np

from .analysis import check_omega, check_theta
from .errors import AssumptionViolation, DisconnectedGraph, NonpositiveReference
from .linalg import solve
from .plant import partitioned_admittance
from .topology import is_connected, laplacian


@dataclass(frozen=True)
class ControllerState:
    delta_i: np.ndarray
    delta_v: np.ndarray
    v_est: np.ndarray
    theta: float
    omega: float
    plugged: np.ndarray
    relay: np.ndarray
    i_ref: np.ndarray


@dataclass(frozen=True)
class _Operators:
    """Per-topology matrices; rebuilt only when plug status changes."""

    lap: np.ndarray
    est_nodes: np.ndarray
    est_relays: np.ndarray
    est_relay_map: np.ndarray
    share_nodes: np.ndarray
    share_relays: np.ndarray
    share_relay_map: np.ndarray


def _relay_map(lap, keep, relays):
    if relays.size == 0:
        return np.zeros((0, keep.size))
    return -solve(lap[np.ix_(relays, relays)], lap[np.ix_(relays, keep)], "L22")


class Controller:
    def __init__(self, model, mode, refresh_ib1=True):
        if mode not in ("uniform", "critical"):
            raise ValueError(f"unknown mode {mode!r}")
        self.model = model
        self.mode = mode
        self.refresh_ib1 = refresh_ib1
        net, ratings = model.net, model.ratings
        self.v_rat = ratings.rated_voltage
        self.i_star = ratings.current_capacity
        self.droop = ratings.droop_coefficient
        n = model.n
        if mode == "uniform":
            if np.any(net.load_conductance <= 0):
                raise AssumptionViolation("uniform mode needs a load on every bus")
            self.regulating = np.ones(n, dtype=bool)
            self.i_b = self.v_rat * net.load_conductance
        else:
            self.regulating = np.zeros(n, dtype=bool)
            self.regulating[list(model.partition.critical)] = True
            self._pa = partitioned_admittance(net, model.partition)
        self._ops_cache = {}

    # -- references ------------------------------------------------------------

    def reference_offset(self, omega, plugged=None):
        """I_b in uniform mode; I_b1 (critical nodes only) in critical mode."""
        if self.mode == "uniform":
            return self.i_b
        pa = self._pa
        cap2 = self.i_star[pa.ordinary]
        if plugged is not None and self.refresh_ib1:
            cap2 = np.where(plugged[pa.ordinary], cap2, 0.0)
        inj = pa.y12 @ solve(pa.y22, cap2, "Ybar22") if pa.ordinary.size else 0.0
        return omega * self.v_rat * pa.schur_ord.sum(axis=1) + inj

    def reference_currents(self, theta, omega, plugged=None):
        theta = check_theta(theta)
        omega = check_omega(omega)
        offset = self.reference_offset(omega, plugged)
        if self.mode == "uniform":
            ir = theta * self.i_star + (1.0 - theta) * offset
        else:
            ir = self.i_star.copy()
            crit = self._pa.critical
            ir[crit] = theta * self.i_star[crit] + (1.0 - theta) * offset
        live = np.ones(ir.size, dtype=bool) if plugged is None else plugged
        if np.any(ir[live] <= 0):
            bad = np.flatnonzero(live & (ir <= 0)).tolist()
            raise NonpositiveReference(f"reference current not positive at nodes {bad}")
        return ir

    # -- state -----------------------------------------------------------------

    def initial_state(self, v_bus, theta, omega):
        n = self.model.n
        plugged = np.ones(n, dtype=bool)
        return ControllerState(
            delta_i=np.zeros(n),
            delta_v=np.zeros(n),
            v_est=np.array(v_bus, dtype=float),
            theta=check_theta(theta),
            omega=check_omega(omega),
            plugged=plugged,
            relay=np.ones(n, dtype=bool),
            i_ref=self.reference_currents(theta, omega, plugged),
        )

    def graph_for(self, state):
        g = self.model.graph
        return type(g)(g.weights, state.plugged | state.relay)

    def operators(self, state):
        key = (state.plugged.tobytes(), state.relay.tobytes())
        ops = self._ops_cache.get(key)
        if ops is not None:
            return ops
        graph = self.graph_for(state)
        if not is_connected(graph):
            raise DisconnectedGraph("active communication graph is disconnected")
        lap = laplacian(graph)
        active = graph.active
        est = np.flatnonzero(self.regulating & state.plugged)
        est_relays = np.flatnonzero(active & ~(self.regulating & state.plugged))
        share = np.flatnonzero(state.plugged)
        share_relays = np.flatnonzero(active & ~state.plugged)
        ops = _Operators(
            lap,
            est,
            est_relays,
            _relay_map(lap, est, est_relays),
            share,
            share_relays,
            _relay_map(lap, share, share_relays),
        )
        self._ops_cache[key] = ops
        return ops

    def relayed_estimates(self, state, ops=None):
        """Full estimate vector with relay entries filled in algebraically."""
        ops = ops or self.operators(state)
        v = state.v_est.copy()
        if ops.est_relays.size:
            v[ops.est_relays] = ops.est_relay_map @ state.v_est[ops.est_nodes]
        return v

    def derivatives(self, state, i_conv, dv_dt, ops=None):
        """Returns ``(d delta_i, d delta_v, d v_est)``; frozen entries are zero."""
        ops = ops or self.operators(state)
        n = self.model.n
        lap = ops.lap

        v_est = self.relayed_estimates(state, ops)
        d_est = np.zeros(n)
        e = ops.est_nodes
        d_est[e] = dv_dt[e] - lap[e] @ v_est
        d_dv = np.zeros(n)
        d_dv[e] = self.v_rat - v_est[e]

        p = np.zeros(n)
        s = ops.share_nodes
        p[s] = i_conv[s] / state.i_ref[s]
        if ops.share_relays.size:
            p[ops.share_relays] = ops.share_relay_map @ p[s]
        d_di = np.zeros(n)
        d_di[s] = -(lap[s] @ p)
        return d_di, d_dv, d_est

    def output(self, state, i_conv):
        """Converter voltage command u for every DG (ordinary nodes carry no delta_v)."""
        return self.v_rat - self.droop * i_conv + state.delta_i + np.where(self.regulating, state.delta_v, 0.0)

    # -- events ----------------------------------------------------------------

    def apply_event(self, state, event, v_bus):
        kind = event.kind
        if kind == "set_theta":
            theta = check_theta(event.value)
            return replace(state, theta=theta, i_ref=self.reference_currents(theta, state.omega, state.plugged))
        if kind == "set_omega":
            omega = check_omega(event.value)
            return replace(state, omega=omega, i_ref=self.reference_currents(state.theta, omega, state.plugged))
        if kind in ("unplug_dg", "plug_dg"):
            plugged = state.plugged.copy()
            relay = state.relay.copy()
            plugged[event.node] = kind == "plug_dg"
            if kind == "unplug_dg":
                relay[event.node] = bool(event.relay)
            else:
                relay[event.node] = True
            new = replace(
                state,
                plugged=plugged,
                relay=relay,
                v_est=np.array(v_bus, dtype=float),
                i_ref=self.reference_currents(state.theta, state.omega, plugged),
            )
            self.operators(new)
            return new
        if kind == "set_load":
            return state
        raise ValueError(f"unknown event {kind!r}")
