"""Self-supervised training loop and evaluation.

The loss for an instance is the negative completed dual objective, so no
primal solutions are needed. Every bound that leaves this module comes from a
solution that passed :func:`verify_dual`.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .completion import Prediction, backward, complete
from .data import InstanceSet, LoadInstance, instances_to_matrix
from .dual import TOL_CONE, TOL_EQ, TOL_PSD, DualSolution, FeasibilityReport, verify_dual
from .grid import Network
from .metrics import duality_gap, gap_closed, geometric_mean
from .mlp import MlpModel, adam_step, backprop, forward, init_mlp

logger = logging.getLogger(__name__)

SPOT_CHECK_RATE = 0.01


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch} (loss {loss})")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class BoundVerificationError(RuntimeError):
    """A completed solution failed verification; its bound must not be used."""

    def __init__(self, instance_id, report: FeasibilityReport):
        super().__init__(f"instance {instance_id}: completed dual failed verification ({report.violated})")
        self.instance_id = instance_id
        self.report = report


def new_model(
    net: Network,
    hidden: Sequence[int] = (64, 64),
    seed: int = 0,
    output_gain: float = 0.1,
    instances: Optional[Sequence[LoadInstance]] = None,
) -> MlpModel:
    """MLP sized for ``net``; outputs are scaled by the largest generator cost.

    ``output_gain=0`` gives the zero-prediction model. Input normalisation is
    taken from ``instances`` when given.
    """
    scale = float(np.max(np.abs(net.cost))) if net.n_bus else 1.0
    model = init_mlp(
        2 * net.n_bus,
        Prediction.size(net),
        hidden=hidden,
        seed=seed,
        output_gain=output_gain,
        output_scale=scale if scale > 0 else 1.0,
    )
    if instances:
        model.set_normalization(instances_to_matrix(instances))
    return model


def complete_batch(
    net: Network,
    model: MlpModel,
    instances: Sequence[LoadInstance],
    eig_method: str = "auto",
    with_grad: bool = False,
):
    """Forward pass and completion for a batch.

    Returns ``(solutions, objectives, cache, grads)``; ``grads`` is the
    ``(k, outputs)`` gradient of each objective w.r.t. the network outputs when
    ``with_grad`` is set, else ``None``.
    """
    Y, cache = forward(model, instances_to_matrix(instances))
    if not np.all(np.isfinite(Y)):
        raise FloatingPointError("model produced non-finite outputs")
    sols, objs, grads = [], np.empty(len(instances)), []
    for k, (inst, y) in enumerate(zip(instances, Y)):
        sol, tape = complete(net, Prediction.from_vector(net, y), inst, eig_method=eig_method)
        sols.append(sol)
        objs[k] = sol.objective
        if with_grad:
            grads.append(backward(net, inst, tape, sol).to_vector())
    return sols, objs, cache, (np.vstack(grads) if with_grad else None)


def _check(net, inst, sol, tolerances):
    report = verify_dual(net, inst, sol, **tolerances)
    if not report.passed:
        raise BoundVerificationError(inst.id, report)
    return report


def mean_bound(net: Network, model: MlpModel, instances: Sequence[LoadInstance], eig_method: str = "auto") -> float:
    _, objs, _, _ = complete_batch(net, model, instances, eig_method)
    return float(np.mean(objs))


@dataclass
class TrainHistory:
    epochs: List[int] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    val_bound: List[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_bound: float = -math.inf
    initial_val_bound: float = -math.inf
    stopped_early: bool = False
    spot_checks: int = 0

    def rows(self):
        return [
            {"epoch": e, "train_loss": l, "val_bound": v}
            for e, l, v in zip(self.epochs, self.train_loss, self.val_bound)
        ]


def write_history(path: Union[str, Path], history: TrainHistory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_bound"])
        w.writeheader()
        for row in history.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def train(
    net: Network,
    model: MlpModel,
    data: InstanceSet,
    epochs: int = 200,
    batch: int = 64,
    lr: float = 1e-3,
    patience: int = 20,
    seed: int = 0,
    weight_decay: float = 0.0,
    eig_method: str = "auto",
    spot_check_rate: float = SPOT_CHECK_RATE,
    tolerances: Optional[Dict[str, float]] = None,
):
    """Mini-batch Adam on the negative mean completed dual objective.

    The validation mean bound is recorded after every epoch (epoch 0 is the
    untrained model) and the best-on-validation parameters are returned.
    Returns ``(model, history)``; the input model is not modified.
    """
    train_set, val_set = data.train, data.val
    if not train_set or not val_set:
        raise ValueError("training needs non-empty train and validation splits")
    if batch < 1 or epochs < 0:
        raise ValueError("batch must be >= 1 and epochs >= 0")
    tolerances = tolerances or {"tol_eq": TOL_EQ, "tol_cone": TOL_CONE, "tol_psd": TOL_PSD}
    rng = np.random.default_rng(seed)
    work = model.copy()
    best = model.copy()
    hist = TrainHistory()
    hist.initial_val_bound = hist.best_val_bound = mean_bound(net, work, val_set, eig_method)
    stale = 0

    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train_set))
        losses = []
        for b, start in enumerate(range(0, len(order), batch)):
            members = [train_set[i] for i in order[start : start + batch]]
            try:
                sols, objs, cache, g = complete_batch(net, work, members, eig_method, with_grad=True)
            except FloatingPointError:
                raise TrainingDivergedError(epoch, b, math.nan) from None
            loss = -float(np.mean(objs))
            if not math.isfinite(loss) or not np.all(np.isfinite(g)):
                raise TrainingDivergedError(epoch, b, loss)
            for inst, sol in zip(members, sols):
                if rng.random() < spot_check_rate:
                    _check(net, inst, sol, tolerances)
                    hist.spot_checks += 1
            grads = backprop(work, cache, -g / len(members))
            adam_step(work, grads, lr=lr, weight_decay=weight_decay)
            losses.append(loss * len(members))
        val = mean_bound(net, work, val_set, eig_method)
        hist.epochs.append(epoch)
        hist.train_loss.append(float(np.sum(losses) / len(train_set)))
        hist.val_bound.append(val)
        logger.info("epoch %d: train loss %.6g, val bound %.6g", epoch, hist.train_loss[-1], val)
        if val > hist.best_val_bound:
            hist.best_val_bound, hist.best_epoch = val, epoch
            best = work.copy()
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                hist.stopped_early = True
                break
    if hist.best_epoch == 0:
        return model.copy(), hist
    best.adam = work.adam
    return best, hist


@dataclass
class Reference:
    z_ac_star: float
    z_sdp_star: Optional[float] = None
    z_hat_soc: Optional[float] = None


def read_refs(path: Union[str, Path]) -> Dict[int, Reference]:
    """CSV with ``instance_id, z_ac_star`` and optional ``z_sdp_star, z_hat_soc``."""

    def opt(row, key):
        v = (row.get(key) or "").strip()
        return float(v) if v else None

    refs = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "instance_id" not in reader.fieldnames or "z_ac_star" not in reader.fieldnames:
            raise ValueError(f"{path}: refs CSV needs instance_id and z_ac_star columns")
        for row in reader:
            refs[int(row["instance_id"])] = Reference(float(row["z_ac_star"]), opt(row, "z_sdp_star"), opt(row, "z_hat_soc"))
    return refs


@dataclass
class EvalResult:
    rows: List[dict]
    reports: List[FeasibilityReport]
    summary: Optional[dict] = None

    @property
    def bounds(self) -> np.ndarray:
        return np.array([r["bound"] for r in self.rows])


def evaluate(
    net: Network,
    model: MlpModel,
    instances: Sequence[LoadInstance],
    refs: Optional[Dict[int, Reference]] = None,
    eig_method: str = "auto",
    tolerances: Optional[Dict[str, float]] = None,
) -> EvalResult:
    """Bound every instance, verifying each one.

    With ``refs``, rows gain ``gap_pct`` (and ``gap_closed`` when the SDP and
    SOC references are present) and a summary with the geometric-mean gap and
    the arithmetic-mean gap closed is attached.
    """
    tolerances = tolerances or {"tol_eq": TOL_EQ, "tol_cone": TOL_CONE, "tol_psd": TOL_PSD}
    rows, reports = [], []
    for inst in instances:
        t0 = time.perf_counter()
        y, _ = forward(model, inst.features[None, :])
        sol, _ = complete(net, Prediction.from_vector(net, y[0]), inst, eig_method=eig_method)
        report = _check(net, inst, sol, tolerances)
        ms = 1000.0 * (time.perf_counter() - t0)
        row = {"instance_id": inst.id, "bound": sol.objective, "wall_time_ms": ms}
        if refs is not None:
            ref = refs.get(inst.id)
            gap = duality_gap(ref.z_ac_star, sol.objective) if ref else None
            row["gap_pct"] = None if gap is None else 100.0 * gap
            if ref and ref.z_sdp_star is not None and ref.z_hat_soc is not None:
                gc = gap_closed(sol.objective, ref.z_sdp_star, ref.z_hat_soc)
                row["gap_closed_pct"] = None if gc is None else 100.0 * gc
        rows.append(row)
        reports.append(report)

    summary = None
    if refs is not None:
        gaps = [r["gap_pct"] for r in rows if r.get("gap_pct") is not None]
        summary = {"instance_id": "summary", "n": len(rows), "n_with_ref": len(gaps)}
        if gaps:
            # a bound can sit a hair above a local-solver reference; clamp for the log-mean
            g = np.maximum(np.asarray(gaps), 0.0)
            summary["gap_pct_geomean"] = geometric_mean(g)
            summary["gap_pct_std"] = float(np.std(g))
        closed = [r["gap_closed_pct"] for r in rows if r.get("gap_closed_pct") is not None]
        if closed:
            summary["gap_closed_pct_mean"] = float(np.mean(closed))
            summary["gap_closed_pct_std"] = float(np.std(closed))
    return EvalResult(rows=rows, reports=reports, summary=summary)


def write_eval_csv(path, result: EvalResult) -> None:
    """Per-instance rows, then (with refs) one ``summary`` row.

    The summary row puts the geometric-mean gap in ``gap_pct`` and the mean
    evaluation time in ``wall_time_ms``.
    """
    cols = ["instance_id", "bound"]
    if result.summary is not None:
        cols.append("gap_pct")
        if any("gap_closed_pct" in r for r in result.rows):
            cols.append("gap_closed_pct")
    cols.append("wall_time_ms")

    def fmt(v):
        if v is None:
            return ""
        return repr(float(v)) if isinstance(v, (float, np.floating)) else v

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in result.rows:
            w.writerow([fmt(r.get(c)) for c in cols])
        if result.summary is not None:
            s = result.summary
            times = [r["wall_time_ms"] for r in result.rows]
            line = {
                "instance_id": "summary",
                "bound": float(np.mean(result.bounds)) if result.rows else None,
                "gap_pct": s.get("gap_pct_geomean"),
                "gap_closed_pct": s.get("gap_closed_pct_mean"),
                "wall_time_ms": float(np.mean(times)) if times else None,
            }
            w.writerow([fmt(line.get(c)) for c in cols])
