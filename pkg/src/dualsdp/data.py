"""Load instances: generation, splitting and JSON-lines I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from .grid import Network

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class LoadInstance:
    p_d: np.ndarray
    q_d: np.ndarray
    id: int = 0

    def __post_init__(self):
        for name in ("p_d", "q_d"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 1-d vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.p_d.shape != self.q_d.shape:
            raise ValueError("p_d and q_d must have the same length")

    @property
    def features(self) -> np.ndarray:
        return np.concatenate([self.p_d, self.q_d])

    @classmethod
    def reference(cls, net: Network) -> "LoadInstance":
        return cls(net.ref_p_d, net.ref_q_d)


@dataclass(frozen=True)
class PerturbationConfig:
    """Instance ``k`` is ``alpha_k * eta_k * reference`` for both p and q.

    ``alpha_k ~ U[alpha_low, alpha_high]`` is a global scale and
    ``eta_{k,i} ~ U[eta_low, eta_high]`` a per-bus factor.
    """

    alpha_low: float = 0.8
    alpha_high: float = 1.2
    eta_low: float = 0.95
    eta_high: float = 1.05


@dataclass
class InstanceSet:
    instances: List[LoadInstance]
    splits: List[str]
    seed: Optional[int] = None
    config: PerturbationConfig = field(default_factory=PerturbationConfig)

    def __len__(self):
        return len(self.instances)

    def subset(self, split: str) -> List[LoadInstance]:
        return [inst for inst, s in zip(self.instances, self.splits) if s == split]

    @property
    def train(self) -> List[LoadInstance]:
        return self.subset("train")

    @property
    def val(self) -> List[LoadInstance]:
        return self.subset("val")

    @property
    def test(self) -> List[LoadInstance]:
        return self.subset("test")


def split_sizes(n: int):
    """90/5/5 split: validation and test are floored, training takes the rest."""
    n_val = (5 * n) // 100
    n_test = (5 * n) // 100
    return n - n_val - n_test, n_val, n_test


def split_labels(n: int, seed: Optional[int] = None) -> List[str]:
    n_train, n_val, n_test = split_sizes(n)
    labels = np.array(["train"] * n_train + ["val"] * n_val + ["test"] * n_test, dtype=object)
    rng = np.random.default_rng(seed)
    rng.shuffle(labels)
    return list(labels)


def generate_instances(
    net: Network, n: int, seed: int = 0, cfg: Optional[PerturbationConfig] = None
) -> InstanceSet:
    if n < 1:
        raise ValueError("need at least one instance")
    cfg = cfg or PerturbationConfig()
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(cfg.alpha_low, cfg.alpha_high, size=(n, 1))
    eta = rng.uniform(cfg.eta_low, cfg.eta_high, size=(n, net.n_bus))
    scale = alpha * eta
    p = scale * net.ref_p_d
    q = scale * net.ref_q_d
    instances = [LoadInstance(p[k], q[k], id=k) for k in range(n)]
    return InstanceSet(instances, split_labels(n, seed), seed=seed, config=cfg)


def instances_to_matrix(instances: Sequence[LoadInstance]) -> np.ndarray:
    """Stack instances into an ``(m, 2n)`` feature matrix ``[p_d | q_d]``."""
    return np.vstack([inst.features for inst in instances])


def matrix_to_instances(X: np.ndarray, ids: Optional[Iterable[int]] = None) -> List[LoadInstance]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1] // 2
    ids = list(ids) if ids is not None else range(len(X))
    return [LoadInstance(row[:n], row[n:], id=int(k)) for row, k in zip(X, ids)]


def write_instances(path: Union[str, Path], data: InstanceSet) -> None:
    with open(path, "w") as fh:
        for inst, split in zip(data.instances, data.splits):
            rec = {"id": inst.id, "p_d": inst.p_d.tolist(), "q_d": inst.q_d.tolist(), "split": split}
            fh.write(json.dumps(rec) + "\n")


def read_instances(path: Union[str, Path]) -> InstanceSet:
    instances, splits = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                inst = LoadInstance(rec["p_d"], rec["q_d"], id=int(rec["id"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad instance record ({exc})") from None
            split = rec.get("split", "test")
            if split not in SPLITS:
                raise ValueError(f"{path}:{lineno}: unknown split {split!r}")
            instances.append(inst)
            splits.append(split)
    return InstanceSet(instances, splits)
