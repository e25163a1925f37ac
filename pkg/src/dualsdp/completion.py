"""Dual completion: predictions -> feasible dual SDP point, with a reverse pass.

Forward steps, given predicted ``lam_p, lam_q`` (per bus) and the p/q parts
of the branch cone multipliers:

1. branch multipliers from the flow-linking equalities,
2. ``nu_s = ||(nu_p, nu_q)||`` on each branch end (tight cone point),
3. generator bound multipliers by the objective-maximal split of the
   stationarity equalities,
4. ``S_hat = -(A_R + j A_I)`` with zero voltage multipliers, then a uniform
   eigenvalue shift ``delta = min(0, lambda_min(S_hat))``, ``S = S_hat - delta I``
   and ``mu_w_hi = -delta`` on every bus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .data import LoadInstance
from .dual import DualSolution, dual_objective
from .grid import Network
from .hermitian import MinEigPair, d_lambda_min, herm_add_scaled, min_eig
from .operators import assemble_adjoint, assemble_ar_ai

__all__ = ["Prediction", "CompletionTape", "assemble_ar_ai", "complete", "backward", "complete_and_grad"]

_PRED_FIELDS = ("lam_p", "lam_q", "nu_p_fwd", "nu_q_fwd", "nu_p_rev", "nu_q_rev")


@dataclass
class Prediction:
    lam_p: np.ndarray
    lam_q: np.ndarray
    nu_p_fwd: np.ndarray
    nu_q_fwd: np.ndarray
    nu_p_rev: np.ndarray
    nu_q_rev: np.ndarray

    @staticmethod
    def size(net: Network) -> int:
        return 2 * net.n_bus + 4 * net.n_branch

    @classmethod
    def zeros(cls, net: Network) -> "Prediction":
        return cls.from_vector(net, np.zeros(cls.size(net)))

    @classmethod
    def from_vector(cls, net: Network, vec) -> "Prediction":
        """Split a flat vector laid out as ``[lam_p, lam_q, nu_p_fwd, nu_q_fwd, nu_p_rev, nu_q_rev]``."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (cls.size(net),):
            raise ValueError(f"prediction vector must have length {cls.size(net)}, got {vec.shape}")
        n, m = net.n_bus, net.n_branch
        cuts = np.cumsum([n, n, m, m, m])
        return cls(*np.split(vec, cuts))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, k) for k in _PRED_FIELDS])


@dataclass
class CompletionTape:
    S_hat: np.ndarray
    delta: float
    min_pair: MinEigPair
    relu_masks: Dict[str, np.ndarray]
    cone_norms: Dict[str, np.ndarray]
    degenerate_flag: bool = False
    extras: dict = field(default_factory=dict)


def complete(net: Network, pred: Prediction, inst: LoadInstance = None, eig_method: str = "auto"):
    """Complete a prediction into a dual-feasible ``DualSolution``.

    The objective is filled in when ``inst`` is given. Returns
    ``(solution, tape)``.
    """
    n, m = net.n_bus, net.n_branch
    lam_p = np.asarray(pred.lam_p, dtype=float)
    lam_q = np.asarray(pred.lam_q, dtype=float)
    if lam_p.shape != (n,) or lam_q.shape != (n,) or np.shape(pred.nu_p_fwd) != (m,):
        raise ValueError("prediction does not match the network dimensions")
    f, t = net.from_idx, net.to_idx

    lam_p_fwd = pred.nu_p_fwd - lam_p[f]
    lam_q_fwd = pred.nu_q_fwd - lam_q[f]
    lam_p_rev = pred.nu_p_rev - lam_p[t]
    lam_q_rev = pred.nu_q_rev - lam_q[t]

    norm_fwd = np.hypot(pred.nu_p_fwd, pred.nu_q_fwd)
    norm_rev = np.hypot(pred.nu_p_rev, pred.nu_q_rev)
    nu_fwd = np.column_stack([norm_fwd, pred.nu_p_fwd, pred.nu_q_fwd])
    nu_rev = np.column_stack([norm_rev, pred.nu_p_rev, pred.nu_q_rev])

    slack_p = net.cost - lam_p
    mu_pg_lo = np.maximum(slack_p, 0.0)
    mu_pg_hi = np.maximum(-slack_p, 0.0)
    mu_qg_lo = np.maximum(-lam_q, 0.0)
    mu_qg_hi = np.maximum(lam_q, 0.0)

    S_hat = -assemble_ar_ai(net, lam_p, lam_q, lam_p_fwd, lam_q_fwd, lam_p_rev, lam_q_rev)
    pair = min_eig(S_hat, method=eig_method)
    delta = min(0.0, pair.lambda_min)
    S = herm_add_scaled(S_hat, -delta)

    sol = DualSolution(
        lam_p=lam_p.copy(),
        lam_q=lam_q.copy(),
        lam_p_fwd=lam_p_fwd,
        lam_q_fwd=lam_q_fwd,
        lam_p_rev=lam_p_rev,
        lam_q_rev=lam_q_rev,
        nu_fwd=nu_fwd,
        nu_rev=nu_rev,
        mu_pg_lo=mu_pg_lo,
        mu_pg_hi=mu_pg_hi,
        mu_qg_lo=mu_qg_lo,
        mu_qg_hi=mu_qg_hi,
        mu_w_lo=np.zeros(n),
        mu_w_hi=np.full(n, -delta),
        S=S,
    )
    if inst is not None:
        sol.objective = dual_objective(net, inst, sol)
    tape = CompletionTape(
        S_hat=S_hat,
        delta=delta,
        min_pair=pair,
        relu_masks={
            "pg_lo": slack_p > 0.0,
            "pg_hi": slack_p < 0.0,
            "qg_lo": lam_q < 0.0,
            "qg_hi": lam_q > 0.0,
        },
        cone_norms={"fwd": norm_fwd, "rev": norm_rev},
        degenerate_flag=bool(delta < 0.0 and pair.degenerate),
    )
    return sol, tape


def backward(net: Network, inst: LoadInstance, tape: CompletionTape, d: DualSolution) -> Prediction:
    """Gradient of the completed dual objective with respect to the prediction.

    Subgradient choices at kinks: a ReLU exactly at zero and a cone at the
    origin contribute nothing; a repeated minimum eigenvalue uses the
    eigenvector stored on the tape.
    """
    f, t = net.from_idx, net.to_idx
    n = net.n_bus
    masks = tape.relu_masks

    g_lam_p = inst.p_d - net.p_min * masks["pg_lo"] - net.p_max * masks["pg_hi"]
    g_lam_q = inst.q_d - net.q_min * masks["qg_lo"] - net.q_max * masks["qg_hi"]

    def cone_grad(nu, norm):
        safe = np.where(norm > 0.0, norm, 1.0)
        scale = np.where(norm > 0.0, -net.s_max / safe, 0.0)
        return scale * nu[:, 1], scale * nu[:, 2]

    g_nu_p_fwd, g_nu_q_fwd = cone_grad(d.nu_fwd, tape.cone_norms["fwd"])
    g_nu_p_rev, g_nu_q_rev = cone_grad(d.nu_rev, tape.cone_norms["rev"])

    if tape.delta < 0.0:
        # objective gains delta * sum(v_max^2); S_hat = -M, so d lambda_min / dM = -G
        weight = float(np.sum(net.v_max**2))
        adj = assemble_adjoint(net, -weight * d_lambda_min(tape.min_pair))
        g_lam_p = g_lam_p + adj["lam_p"]
        g_lam_q = g_lam_q + adj["lam_q"]
        g_nu_p_fwd = g_nu_p_fwd + adj["lam_p_fwd"]
        g_nu_q_fwd = g_nu_q_fwd + adj["lam_q_fwd"]
        g_nu_p_rev = g_nu_p_rev + adj["lam_p_rev"]
        g_nu_q_rev = g_nu_q_rev + adj["lam_q_rev"]
        g_lam_p = g_lam_p - np.bincount(f, adj["lam_p_fwd"], minlength=n) - np.bincount(t, adj["lam_p_rev"], minlength=n)
        g_lam_q = g_lam_q - np.bincount(f, adj["lam_q_fwd"], minlength=n) - np.bincount(t, adj["lam_q_rev"], minlength=n)

    return Prediction(g_lam_p, g_lam_q, g_nu_p_fwd, g_nu_q_fwd, g_nu_p_rev, g_nu_q_rev)


def complete_and_grad(net: Network, inst: LoadInstance, pred: Prediction, eig_method: str = "auto"):
    """Forward + backward in one call: ``(solution, gradient, tape)``."""
    sol, tape = complete(net, pred, inst, eig_method=eig_method)
    return sol, backward(net, inst, tape, sol), tape
