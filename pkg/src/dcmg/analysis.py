"""Closed-form steady state of the compromised controllers.

Everything here is algebra on the load-augmented admittance matrix; nothing
is simulated. ``plant.steady_state_oracle`` is the independent brute-force
check used by the tests.
"""
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolation, DegenerateLoadProfile, NonpositiveNu
from .linalg import solve
from .plant import load_augmented, partitioned_admittance
from .topology import NodePartition

RATIO_RTOL = 1e-9


def check_theta(theta, upper_open=False):
    theta = float(theta)
    hi_ok = theta < 1.0 if upper_open else theta <= 1.0
    if not (0.0 <= theta and hi_ok):
        rng = "[0, 1)" if upper_open else "[0, 1]"
        raise ValueError(f"theta={theta} outside {rng}")
    return theta


def check_omega(omega):
    omega = float(omega)
    if not (omega > 0 and np.isfinite(omega)):
        raise ValueError(f"omega={omega} must be positive and finite")
    return omega


@dataclass(frozen=True)
class DeviationReport:
    delta_v: np.ndarray
    delta_i: np.ndarray

    @property
    def mvdr(self):
        return float(np.max(np.abs(self.delta_v))) if self.delta_v.size else 0.0

    @property
    def mcdr(self):
        return float(np.max(np.abs(self.delta_i))) if self.delta_i.size else 0.0


def deviations(v, i, i_star, v_rat, buses=None, dgs=None):
    """VDR over ``buses`` and CDR over ``dgs`` (all nodes when None)."""
    v = np.asarray(v, dtype=float)
    i = np.asarray(i, dtype=float)
    i_star = np.asarray(i_star, dtype=float)
    buses = np.arange(v.size) if buses is None else np.asarray(buses, dtype=int)
    dgs = np.arange(i.size) if dgs is None else np.asarray(dgs, dtype=int)
    dv = (v[buses] - v_rat) / v_rat
    ipu = i[dgs] / i_star[dgs]
    if ipu.size:
        avg = ipu.mean()
        if avg == 0:
            raise DegenerateLoadProfile("mean per-unit current is zero")
        di = (ipu - avg) / avg
    else:
        di = ipu
    return DeviationReport(dv, di)


@dataclass(frozen=True)
class ConflictCheck:
    compatible: bool
    ratios: np.ndarray


def conflict_check(net, ratings):
    """Can accurate sharing and exact voltage consensus coexist?"""
    g = net.load_conductance
    cap = ratings.current_capacity
    with np.errstate(divide="ignore"):
        ratios = np.where(g > 0, cap / np.where(g > 0, g, 1.0), np.inf)
    if np.any(g <= 0):
        return ConflictCheck(False, ratios)
    ok = bool(np.all(np.abs(ratios - ratios[0]) <= RATIO_RTOL * abs(ratios[0])))
    return ConflictCheck(ok, ratios)


# -- all nodes equal ----------------------------------------------------------


@dataclass(frozen=True)
class UniformSteadyState:
    mu: float
    psi: np.ndarray
    i_b: np.ndarray
    i_pu_b: np.ndarray
    i_pu_b_mean: float
    delta_i_b: np.ndarray
    i_star: np.ndarray
    v_rat: float

    @property
    def n(self):
        return self.psi.size


def uniform_steady(net, ratings):
    g = net.load_conductance
    if np.any(g <= 0):
        bad = [int(k) for k in np.flatnonzero(g <= 0)]
        raise AssumptionViolation(f"buses {bad} carry no load")
    v_rat = ratings.rated_voltage
    i_star = ratings.current_capacity
    x = solve(load_augmented(net), i_star, "Ybar") / v_rat
    mu = float(x.mean())
    psi = x - mu
    i_b = v_rat * g
    i_pu_b = i_b / i_star
    mean = float(i_pu_b.mean())
    if mean <= 0:
        raise DegenerateLoadProfile("mean per-unit load current is not positive")
    return UniformSteadyState(mu, psi, i_b, i_pu_b, mean, (i_pu_b - mean) / mean, i_star, v_rat)


def uniform_alpha(ss, theta):
    theta = check_theta(theta)
    return 1.0 / (ss.mu * theta + 1.0 - theta)


def uniform_delta_v(ss, theta):
    theta = check_theta(theta)
    return theta / ((ss.mu - 1.0) * theta + 1.0) * ss.psi


def uniform_delta_i(ss, theta):
    theta = check_theta(theta)
    if ss.i_pu_b_mean <= 0:
        raise DegenerateLoadProfile("mean per-unit load current is not positive")
    return (1.0 - theta) / (theta * (1.0 / ss.i_pu_b_mean - 1.0) + 1.0) * ss.delta_i_b


def uniform_reference(ss, theta):
    theta = check_theta(theta)
    return theta * ss.i_star + (1.0 - theta) * ss.i_b


def uniform_solution(ss, theta):
    """Closed-form ``(V, I, alpha)`` for the all-node controller."""
    alpha = uniform_alpha(ss, theta)
    v = ss.v_rat * (1.0 + uniform_delta_v(ss, theta))
    return v, alpha * uniform_reference(ss, theta), alpha


def _design_theta(psi_inf, mu, omega, gamma_v):
    gamma_v = float(gamma_v)
    if gamma_v < 0:
        raise ValueError("gamma_v must be >= 0")
    if gamma_v == 0:
        return 0.0
    worst = psi_inf / mu
    if worst <= gamma_v:
        return 1.0
    return omega * gamma_v / (psi_inf - gamma_v * (mu - omega))


def design_theta_uniform(ss, gamma_v):
    """Largest theta keeping every bus inside the admissible deviation."""
    return _design_theta(float(np.max(np.abs(ss.psi))), ss.mu, 1.0, gamma_v)


# -- critical / ordinary split ---------------------------------------------------


def i_b1(pa, ratings, omega):
    omega = check_omega(omega)
    v_rat = ratings.rated_voltage
    cap2 = ratings.current_capacity[pa.ordinary]
    return omega * v_rat * pa.schur_ord.sum(axis=1) + _ordinary_injection(pa, cap2)


def _ordinary_injection(pa, cap2):
    if pa.ordinary.size == 0:
        return np.zeros(pa.critical.size)
    return pa.y12 @ solve(pa.y22, cap2, "Ybar22")


@dataclass(frozen=True)
class CriticalSteadyState:
    mu: float
    psi1: np.ndarray
    omega: float
    i_b1: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    xi_offset: np.ndarray
    upsilon1: np.ndarray
    i_star: np.ndarray
    v_rat: float
    partition: NodePartition

    @property
    def critical(self):
        return np.array(self.partition.critical, dtype=int)

    @property
    def ordinary(self):
        return np.array(self.partition.ordinary, dtype=int)

    @property
    def i_star1(self):
        return self.i_star[self.critical]

    def xi1(self, theta):
        theta = check_theta(theta, upper_open=True)
        return -theta / (1.0 - theta) * self.i_star1 - self.xi_offset


def critical_steady(pa, ratings, omega):
    omega = check_omega(omega)
    v_rat = ratings.rated_voltage
    cap = ratings.current_capacity
    crit, ordn = pa.critical, pa.ordinary
    cap1, cap2 = cap[crit], cap[ordn]
    offset = _ordinary_injection(pa, cap2)
    x = solve(pa.schur_ord, cap1 - offset, "Ybar22|Ybar") / v_rat
    mu = float(x.mean())
    psi1 = x - mu
    upsilon = v_rat * pa.schur_ord.sum(axis=1)
    ib1 = omega * upsilon + offset
    if ordn.size:
        t = solve(pa.y11, np.column_stack([cap1 - ib1, ib1]), "Ybar11")
        omega1 = -solve(pa.schur_cri, pa.y21 @ t[:, 0], "Ybar11|Ybar")
        omega2 = solve(pa.schur_cri, cap2 - pa.y21 @ t[:, 1], "Ybar11|Ybar")
    else:
        omega1 = omega2 = np.zeros(0)
    return CriticalSteadyState(mu, psi1, omega, ib1, omega1, omega2, offset, upsilon, cap, v_rat, pa.partition)


def critical_alpha(css, theta):
    theta = check_theta(theta)
    return 1.0 / (css.mu * theta + css.omega * (1.0 - theta))


def critical_reference(css, theta):
    """Reference currents for every DG: compromised on critical, I* on ordinary."""
    theta = check_theta(theta)
    ir = css.i_star.copy()
    ir[css.critical] = theta * css.i_star1 + (1.0 - theta) * css.i_b1
    return ir


def critical_ipu1(css, theta):
    alpha = critical_alpha(css, theta)
    return alpha * (theta + (1.0 - theta) * css.i_b1 / css.i_star1)


def critical_delta_v(css, theta):
    theta = check_theta(theta)
    return theta / ((css.mu - css.omega) * theta + css.omega) * css.psi1


def critical_delta_i(css, theta):
    theta = check_theta(theta)
    ipu_b1 = css.i_b1 / css.i_star1
    mean = float(ipu_b1.mean())
    if mean <= 0:
        raise DegenerateLoadProfile("mean per-unit critical reference offset is not positive")
    delta_b1 = (ipu_b1 - mean) / mean
    return (1.0 - theta) / (theta * (1.0 / mean - 1.0) + 1.0) * delta_b1


def ordinary_voltages(css, theta):
    alpha = critical_alpha(css, theta)
    return alpha * (theta * css.omega1 + css.omega2)


def critical_solution(css, theta):
    """Closed-form ``(V, I, alpha)`` over all buses for the split controller."""
    alpha = critical_alpha(css, theta)
    n = css.i_star.size
    v = np.empty(n)
    v[css.critical] = css.v_rat * (1.0 + critical_delta_v(css, theta))
    v[css.ordinary] = ordinary_voltages(css, theta)
    return v, alpha * critical_reference(css, theta), alpha


def design_theta_critical(css, gamma_v):
    return _design_theta(float(np.max(np.abs(css.psi1))), css.mu, css.omega, gamma_v)


def design_theta_critical_literal(css, gamma_v):
    """Alternative reading of the middle branch; kept for comparison only."""
    psi_inf = float(np.max(np.abs(css.psi1)))
    return css.omega * gamma_v / ((css.mu - css.omega) * (psi_inf - gamma_v))


@dataclass(frozen=True)
class OmegaRange:
    lower: float
    binding_node: int
    zeta: np.ndarray
    nu: np.ndarray
    monotone_condition: float

    @property
    def critical_sum_increasing(self):
        """Sufficient condition for the critical current total to rise with omega."""
        return self.monotone_condition < 0


def omega_range(css, theta):
    theta = check_theta(theta, upper_open=True)
    nu = css.upsilon1
    if np.any(nu <= 0):
        raise NonpositiveNu(f"nu has nonpositive entries at critical positions {np.flatnonzero(nu <= 0).tolist()}")
    zeta = css.xi1(theta)
    q = zeta / nu
    k = int(np.argmax(q))
    cond = theta * css.i_star1.sum() + (1.0 - theta) * css.xi_offset.sum()
    return OmegaRange(float(q[k]), int(css.critical[k]), zeta, nu, float(cond))


def critical_pipeline(net, ratings, critical, omega):
    """Convenience: partition, admittance blocks and steady state in one call."""
    part = critical if isinstance(critical, NodePartition) else NodePartition(net.n_bus, tuple(critical))
    return critical_steady(partitioned_admittance(net, part), ratings, omega)
