"""Tiny-network ground truth for AC-OPF.

``brute_force_opf`` enumerates a grid over the set points of buses with a
dispatchable generator (voltage magnitude, and active dispatch except at the
slack bus) and solves the remaining voltages with a Newton power flow, so every
candidate satisfies power balance to ``NEWTON_TOL``. Slack dispatch and all
reactive dispatch follow from balance and are checked against their bounds,
together with voltage and thermal limits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import LoadInstance
from .grid import Network

MAX_ORACLE_BUSES = 3
NEWTON_TOL = 1e-10
NEWTON_ITERS = 30


@dataclass
class AcPoint:
    v: np.ndarray
    theta: np.ndarray
    p_g: Optional[np.ndarray] = None
    q_g: Optional[np.ndarray] = None

    @property
    def V(self) -> np.ndarray:
        return self.v * np.exp(1j * self.theta)


def branch_flows(net: Network, V: np.ndarray):
    """Complex from-end and to-end flows ``(S_fwd, S_rev)`` for voltages ``V``."""
    f, t = net.from_idx, net.to_idx
    Vf, Vt = V[..., f], V[..., t]
    s_fwd = np.conj(net.y_ff) * np.abs(Vf) ** 2 + np.conj(net.y_ft) * Vf * np.conj(Vt)
    s_rev = np.conj(net.y_tt) * np.abs(Vt) ** 2 + np.conj(net.y_tf) * Vt * np.conj(Vf)
    return s_fwd, s_rev


def bus_injections(net: Network, V: np.ndarray) -> np.ndarray:
    """Net complex power leaving each bus into branches and shunts."""
    Y = net.ybus()
    return V * np.conj(V @ Y.T)


@dataclass
class AcResiduals:
    balance: np.ndarray
    s_fwd: np.ndarray
    s_rev: np.ndarray
    violations: dict = field(default_factory=dict)

    @property
    def max_mismatch(self) -> float:
        return float(np.max(np.abs(self.balance))) if self.balance.size else 0.0

    @property
    def max_violation(self) -> float:
        vals = [float(np.max(v)) for v in self.violations.values() if np.size(v)]
        return max(vals + [0.0])

    def max_norm(self) -> float:
        return max(self.max_mismatch, self.max_violation)


def ac_residuals(net: Network, inst: LoadInstance, pt: AcPoint) -> AcResiduals:
    """Power-balance mismatch and limit violations of an AC operating point.

    If ``pt`` has no dispatch, it is taken from power balance and clipped to
    the generator bounds, so any infeasibility shows up as mismatch.
    """
    V = pt.V
    s_fwd, s_rev = branch_flows(net, V)
    f, t = net.from_idx, net.to_idx
    n = net.n_bus
    shunt = np.conj(net.shunt_g + 1j * net.shunt_b) * pt.v**2
    outflow = (
        np.bincount(f, s_fwd.real, minlength=n)
        + np.bincount(t, s_rev.real, minlength=n)
        + 1j * (np.bincount(f, s_fwd.imag, minlength=n) + np.bincount(t, s_rev.imag, minlength=n))
    )
    s_d = inst.p_d + 1j * inst.q_d
    needed = outflow + s_d + shunt
    p_g = np.clip(needed.real, net.p_min, net.p_max) if pt.p_g is None else np.asarray(pt.p_g, dtype=float)
    q_g = np.clip(needed.imag, net.q_min, net.q_max) if pt.q_g is None else np.asarray(pt.q_g, dtype=float)
    balance = p_g + 1j * q_g - s_d - shunt - outflow
    viol = {
        "v_lo": np.maximum(net.v_min - pt.v, 0.0),
        "v_hi": np.maximum(pt.v - net.v_max, 0.0),
        "pg_lo": np.maximum(net.p_min - p_g, 0.0),
        "pg_hi": np.maximum(p_g - net.p_max, 0.0),
        "qg_lo": np.maximum(net.q_min - q_g, 0.0),
        "qg_hi": np.maximum(q_g - net.q_max, 0.0),
        "thermal_fwd": np.maximum(np.abs(s_fwd) - net.s_max, 0.0),
        "thermal_rev": np.maximum(np.abs(s_rev) - net.s_max, 0.0),
    }
    return AcResiduals(balance=balance, s_fwd=s_fwd, s_rev=s_rev, violations=viol)


def rank1_certificate(pt: AcPoint) -> np.ndarray:
    """``W = V V^H`` for the point's complex voltages."""
    V = pt.V
    return np.outer(V, V.conj())


@dataclass
class GridConfig:
    steps: int = 21
    # starting-angle box is not searched; kept for the record of past configs
    angle_limit: float = math.pi / 3
    refinements: int = 8
    feas_tol: float = 1e-6


@dataclass
class OracleResult:
    feasible: bool
    best_cost: float
    best_point: Optional[AcPoint]
    grid: GridConfig
    feas_tol: float
    pass_costs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        pt = self.best_point
        return {
            "feasible": self.feasible,
            "best_cost": self.best_cost if self.feasible else None,
            "pass_costs": self.pass_costs,
            "grid": {
                "steps": self.grid.steps,
                "angle_limit": self.grid.angle_limit,
                "refinements": self.grid.refinements,
                "feas_tol": self.grid.feas_tol,
            },
            "point": None
            if pt is None
            else {"v": pt.v.tolist(), "theta": pt.theta.tolist(), "p_g": pt.p_g.tolist(), "q_g": pt.q_g.tolist()},
        }


def _power_flow(net, V, pv, pq, p_target, s_target):
    """Batched polar Newton power flow.

    ``V`` has shape ``(k, n)`` and holds the slack voltage, the PV magnitudes
    and the starting guess; it is updated in place. ``p_target`` (``(k, |pv|)``)
    is the net active injection at PV buses, ``s_target`` (``(|pq|,)``) the
    complex injection at PQ buses. Returns the converged mask.
    """
    Y = net.ybus()
    pvpq = np.concatenate([pv, pq])
    n_a, n_m = pvpq.size, pq.size
    if n_a == 0:
        return np.ones(len(V), dtype=bool)
    eye = np.eye(net.n_bus)

    def mismatch(V):
        S = V * np.conj(V @ Y.T)
        return np.concatenate(
            [S[:, pv].real - p_target, S[:, pq].real - s_target.real, S[:, pq].imag - s_target.imag], axis=1
        )

    for _ in range(NEWTON_ITERS):
        F = mismatch(V)
        if np.all(np.max(np.abs(F), axis=1) < NEWTON_TOL):
            break
        I = V @ Y.T
        vabs = np.abs(V)
        vnorm = V / np.where(vabs > 0, vabs, 1.0)
        diag_i = np.conj(I)[:, :, None] * eye
        dS_dVm = V[:, :, None] * np.conj(Y[None] * vnorm[:, None, :]) + diag_i * vnorm[:, None, :]
        dS_dVa = 1j * V[:, :, None] * np.conj(I[:, :, None] * eye - Y[None] * V[:, None, :])
        J = np.concatenate(
            [
                np.concatenate([dS_dVa[:, pvpq][:, :, pvpq].real, dS_dVm[:, pvpq][:, :, pq].real], axis=2),
                np.concatenate([dS_dVa[:, pq][:, :, pvpq].imag, dS_dVm[:, pq][:, :, pq].imag], axis=2),
            ],
            axis=1,
        )
        try:
            dx = np.linalg.solve(J, -F[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            dx = np.stack([np.linalg.lstsq(Jk, -Fk, rcond=None)[0] for Jk, Fk in zip(J, F)])
        va = np.angle(V)
        va[:, pvpq] += dx[:, :n_a]
        vabs[:, pq] += dx[:, n_a:]
        V[:] = vabs * np.exp(1j * va)
    F = mismatch(V)
    err = np.max(np.abs(F), axis=1)
    return np.isfinite(err) & (err < 1e-8)


def _evaluate(net, inst, slack, pv, pq, v_ctrl, p_pv, tol):
    """Cost of each candidate (``inf`` if infeasible), voltages and dispatch."""
    k = len(v_ctrl)
    n = net.n_bus
    ctrl = np.concatenate([[slack], pv])
    V = np.ones((k, n), dtype=complex)
    V[:, ctrl] = v_ctrl
    s_d = inst.p_d + 1j * inst.q_d
    s_fixed = (net.p_min + 1j * net.q_min)[pq] - s_d[pq]
    ok = _power_flow(net, V, pv, pq, p_pv - inst.p_d[pv], s_fixed)
    S_g = V * np.conj(V @ net.ybus().T) + s_d
    vmag = np.abs(V)
    s_fwd, s_rev = branch_flows(net, V)
    ok &= np.all(vmag >= net.v_min - tol, axis=1) & np.all(vmag <= net.v_max + tol, axis=1)
    ok &= np.all(S_g.real >= net.p_min - tol, axis=1) & np.all(S_g.real <= net.p_max + tol, axis=1)
    ok &= np.all(S_g.imag >= net.q_min - tol, axis=1) & np.all(S_g.imag <= net.q_max + tol, axis=1)
    if net.n_branch:
        ok &= np.all(np.abs(s_fwd) <= net.s_max + tol, axis=1) & np.all(np.abs(s_rev) <= net.s_max + tol, axis=1)
    with np.errstate(invalid="ignore"):
        cost = np.where(ok, S_g.real @ net.cost, np.inf)
    return cost, V, S_g


def brute_force_opf(net: Network, inst: LoadInstance, grid: Optional[GridConfig] = None) -> OracleResult:
    """Exhaustive grid search for the cheapest AC-feasible dispatch (``n_bus <= 3``).

    Buses with a dispatchable generator are voltage-controlled: the grid spans
    their voltage magnitudes and, except for the slack bus (the first of them,
    angle 0), their active dispatch. Everything else follows from a Newton
    power flow. Each refinement pass recentres the grid on the incumbent with
    half the previous span; the incumbent is only replaced by a cheaper point,
    and ties go to the lowest grid index.
    """
    grid = grid or GridConfig()
    n = net.n_bus
    if n > MAX_ORACLE_BUSES:
        raise ValueError(f"brute-force oracle supports at most {MAX_ORACLE_BUSES} buses, got {n}")
    dispatchable = (net.p_max > net.p_min) | (net.q_max > net.q_min)
    ctrl = np.flatnonzero(dispatchable)
    if ctrl.size == 0:
        ctrl = np.array([0])
    slack, pv = ctrl[0], ctrl[1:]
    pq = np.setdiff1d(np.arange(n), ctrl)

    lo = np.concatenate([net.v_min[ctrl], net.p_min[pv]])
    hi = np.concatenate([net.v_max[ctrl], net.p_max[pv]])
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    n_v = ctrl.size

    best_cost, best = math.inf, None
    pass_costs = []
    for _ in range(grid.refinements + 1):
        axes = []
        for c, h, l, u in zip(center, half, lo, hi):
            axis = np.unique(np.clip(np.linspace(c - h, c + h, grid.steps), l, u)) if h > 0 else np.array([c])
            axes.append(axis)
        pts = np.array(list(itertools.product(*axes)))
        cost, V, S_g = _evaluate(net, inst, slack, pv, pq, pts[:, :n_v], pts[:, n_v:], grid.feas_tol)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = float(cost[k])
            Vb = V[k]
            best = AcPoint(
                v=np.abs(Vb), theta=np.angle(Vb) - np.angle(Vb[slack]), p_g=S_g[k].real.copy(), q_g=S_g[k].imag.copy()
            )
            center = pts[k]
        pass_costs.append(best_cost)
        half = half / 2.0

    return OracleResult(
        feasible=best is not None,
        best_cost=best_cost,
        best_point=best,
        grid=grid,
        feas_tol=grid.feas_tol,
        pass_costs=pass_costs,
    )
