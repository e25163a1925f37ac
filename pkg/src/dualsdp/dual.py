"""Dual SDP variables, objective, feasibility check and JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np

from .data import LoadInstance
from .grid import Network
from .hermitian import min_eig
from .operators import assemble_ar_ai

TOL_EQ = 1e-8
TOL_CONE = 1e-8
TOL_PSD = -1e-8

SCHEMA = "dualsdp.dual"
SCHEMA_VERSION = 1

_BUS_FIELDS = ("lam_p", "lam_q", "mu_pg_lo", "mu_pg_hi", "mu_qg_lo", "mu_qg_hi", "mu_w_lo", "mu_w_hi")
_BRANCH_FIELDS = ("lam_p_fwd", "lam_q_fwd", "lam_p_rev", "lam_q_rev")
_CONE_FIELDS = ("nu_fwd", "nu_rev")


@dataclass
class DualSolution:
    """A point of the dual SDP.

    ``nu_fwd`` and ``nu_rev`` have shape ``(n_branch, 3)`` with columns
    ``(s, p, q)``; ``S`` is a dense Hermitian matrix.
    """

    lam_p: np.ndarray
    lam_q: np.ndarray
    lam_p_fwd: np.ndarray
    lam_q_fwd: np.ndarray
    lam_p_rev: np.ndarray
    lam_q_rev: np.ndarray
    nu_fwd: np.ndarray
    nu_rev: np.ndarray
    mu_pg_lo: np.ndarray
    mu_pg_hi: np.ndarray
    mu_qg_lo: np.ndarray
    mu_qg_hi: np.ndarray
    mu_w_lo: np.ndarray
    mu_w_hi: np.ndarray
    S: np.ndarray
    objective: Optional[float] = None

    @classmethod
    def zeros(cls, net: Network) -> "DualSolution":
        n, m = net.n_bus, net.n_branch
        kw = {k: np.zeros(n) for k in _BUS_FIELDS}
        kw.update({k: np.zeros(m) for k in _BRANCH_FIELDS})
        kw.update({k: np.zeros((m, 3)) for k in _CONE_FIELDS})
        return cls(S=np.zeros((n, n), dtype=complex), **kw)

    def copy(self) -> "DualSolution":
        kw = {k: np.array(v, copy=True) if isinstance(v, np.ndarray) else v for k, v in self.__dict__.items()}
        return DualSolution(**kw)

    def check_shapes(self, net: Network) -> None:
        n, m = net.n_bus, net.n_branch
        for k in _BUS_FIELDS:
            if np.shape(getattr(self, k)) != (n,):
                raise ValueError(f"{k}: expected shape ({n},), got {np.shape(getattr(self, k))}")
        for k in _BRANCH_FIELDS:
            if np.shape(getattr(self, k)) != (m,):
                raise ValueError(f"{k}: expected shape ({m},), got {np.shape(getattr(self, k))}")
        for k in _CONE_FIELDS:
            if np.shape(getattr(self, k)) != (m, 3):
                raise ValueError(f"{k}: expected shape ({m}, 3), got {np.shape(getattr(self, k))}")
        if np.shape(self.S) != (n, n):
            raise ValueError(f"S: expected shape ({n}, {n}), got {np.shape(self.S)}")

    def to_dict(self) -> dict:
        n = self.S.shape[0]
        iu = np.triu_indices(n)
        upper = self.S[iu]
        s_flat = np.empty(2 * upper.size)
        s_flat[0::2] = upper.real
        s_flat[1::2] = upper.imag
        out = {"schema": SCHEMA, "version": SCHEMA_VERSION, "n_bus": n, "n_branch": len(self.lam_p_fwd)}
        for k in _BUS_FIELDS + _BRANCH_FIELDS:
            out[k] = np.asarray(getattr(self, k), dtype=float).tolist()
        for k in _CONE_FIELDS:
            out[k] = np.asarray(getattr(self, k), dtype=float).reshape(-1).tolist()
        out["S"] = s_flat.tolist()
        out["objective"] = self.objective
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DualSolution":
        if d.get("schema") != SCHEMA or d.get("version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported dual schema {d.get('schema')!r} version {d.get('version')!r}")
        n, m = int(d["n_bus"]), int(d["n_branch"])
        kw = {k: np.asarray(d[k], dtype=float) for k in _BUS_FIELDS + _BRANCH_FIELDS}
        for k in _CONE_FIELDS:
            kw[k] = np.asarray(d[k], dtype=float).reshape(m, 3)
        s_flat = np.asarray(d["S"], dtype=float)
        if s_flat.size != n * (n + 1):
            raise ValueError(f"S: expected {n * (n + 1)} numbers, got {s_flat.size}")
        iu = np.triu_indices(n)
        upper = s_flat[0::2] + 1j * s_flat[1::2]
        S = np.zeros((n, n), dtype=complex)
        S[iu] = upper
        S[iu[1], iu[0]] = upper.conj()
        # a nonzero stored diagonal imaginary part survives as a non-Hermitian S
        S[np.diag_indices(n)] = upper[np.flatnonzero(iu[0] == iu[1])]
        return cls(S=S, objective=d.get("objective"), **kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "DualSolution":
        return cls.from_dict(json.loads(text))


def dual_objective(net: Network, inst: LoadInstance, d: DualSolution) -> float:
    """Dual SDP objective, term by term."""
    d.check_shapes(net)
    if inst.p_d.shape != (net.n_bus,):
        raise ValueError("instance does not match the network size")
    per_bus = (
        inst.p_d * d.lam_p
        + inst.q_d * d.lam_q
        + net.v_min**2 * d.mu_w_lo
        - net.v_max**2 * d.mu_w_hi
        + net.p_min * d.mu_pg_lo
        - net.p_max * d.mu_pg_hi
        + net.q_min * d.mu_qg_lo
        - net.q_max * d.mu_qg_hi
    )
    per_branch = net.s_max * (d.nu_fwd[:, 0] + d.nu_rev[:, 0])
    return float(np.sum(per_bus) - np.sum(per_branch))


@dataclass
class FeasibilityReport:
    max_eq_residual: float
    worst_cone_violation: float
    min_eig_S: float
    passed: bool
    residuals: Dict[str, float] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def violated(self):
        """Constraint families outside tolerance."""
        tol_eq = self.tolerances.get("eq", TOL_EQ)
        tol_cone = self.tolerances.get("cone", TOL_CONE)
        tol_psd = self.tolerances.get("psd", TOL_PSD)
        bad = []
        for name, r in self.residuals.items():
            if name == "psd":
                if not r >= tol_psd:
                    bad.append(name)
            elif name in ("cone", "sign"):
                if not r <= tol_cone:
                    bad.append(name)
            elif not r <= tol_eq:
                bad.append(name)
        return bad

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        out["violated"] = self.violated
        return out


def _max_abs(x) -> float:
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x)))


def verify_dual(
    net: Network,
    inst: LoadInstance,
    d: DualSolution,
    tol_eq: float = TOL_EQ,
    tol_cone: float = TOL_CONE,
    tol_psd: float = TOL_PSD,
    eig_method: str = "auto",
) -> FeasibilityReport:
    """Check every dual constraint and report worst violations per family.

    NaN residuals count as failures.
    """
    d.check_shapes(net)
    f, t = net.from_idx, net.to_idx
    res = {}
    res["pg"] = _max_abs(d.lam_p + d.mu_pg_lo - d.mu_pg_hi - net.cost)
    res["qg"] = _max_abs(d.lam_q + d.mu_qg_lo - d.mu_qg_hi)
    res["flow_p_fwd"] = _max_abs(-d.lam_p[f] - d.lam_p_fwd + d.nu_fwd[:, 1])
    res["flow_q_fwd"] = _max_abs(-d.lam_q[f] - d.lam_q_fwd + d.nu_fwd[:, 2])
    res["flow_p_rev"] = _max_abs(-d.lam_p[t] - d.lam_p_rev + d.nu_rev[:, 1])
    res["flow_q_rev"] = _max_abs(-d.lam_q[t] - d.lam_q_rev + d.nu_rev[:, 2])
    A = assemble_ar_ai(
        net, d.lam_p, d.lam_q, d.lam_p_fwd, d.lam_q_fwd, d.lam_p_rev, d.lam_q_rev, d.mu_w_lo, d.mu_w_hi
    )
    S = np.asarray(d.S, dtype=complex)
    res["psd_link"] = max(_max_abs(A + S), _max_abs(S - S.conj().T))

    cone = 0.0
    for nu in (d.nu_fwd, d.nu_rev):
        if len(nu):
            cone = max(cone, float(np.max(np.maximum(np.hypot(nu[:, 1], nu[:, 2]) - nu[:, 0], 0.0))))
    res["cone"] = cone
    mus = np.concatenate([d.mu_pg_lo, d.mu_pg_hi, d.mu_qg_lo, d.mu_qg_hi, d.mu_w_lo, d.mu_w_hi])
    res["sign"] = float(np.max(np.maximum(-mus, 0.0))) if mus.size else 0.0

    if np.all(np.isfinite(S)):
        lam = min_eig(0.5 * (S + S.conj().T), method=eig_method).lambda_min
    else:
        lam = float("nan")
    res["psd"] = lam

    eq_keys = ("pg", "qg", "flow_p_fwd", "flow_q_fwd", "flow_p_rev", "flow_q_rev", "psd_link")
    max_eq = max(res[k] for k in eq_keys)
    worst_cone = max(res["cone"], res["sign"])
    passed = bool(max_eq <= tol_eq and worst_cone <= tol_cone and lam >= tol_psd)
    return FeasibilityReport(
        max_eq_residual=max_eq,
        worst_cone_violation=worst_cone,
        min_eig_S=lam,
        passed=passed,
        residuals=res,
        tolerances={"eq": tol_eq, "cone": tol_cone, "psd": tol_psd},
    )
