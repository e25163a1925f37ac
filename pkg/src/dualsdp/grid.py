"""Per-unit power network model and branch admittances."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Bus:
    id: int
    shunt_g: float = 0.0
    shunt_b: float = 0.0
    v_min: float = 0.9
    v_max: float = 1.1


@dataclass(frozen=True)
class Generator:
    """Linear-cost generator. Buses without a physical unit get a zero-bound dummy."""

    bus: int
    cost: float = 0.0
    p_min: float = 0.0
    p_max: float = 0.0
    q_min: float = 0.0
    q_max: float = 0.0

    @classmethod
    def dummy(cls, bus: int) -> "Generator":
        return cls(bus=bus)


@dataclass(frozen=True)
class BranchAdmittance:
    from_bus: int
    to_bus: int
    y_ff: complex
    y_ft: complex
    y_tf: complex
    y_tt: complex
    s_max: float


def build_branch_admittance(
    r: float, x: float, b_charge: float = 0.0, tap_ratio: float = 1.0, phase_shift: float = 0.0
) -> Tuple[complex, complex, complex, complex]:
    """Pi-model admittance entries ``(y_ff, y_ft, y_tf, y_tt)`` of one branch.

    ``phase_shift`` is in radians. MATPOWER conventions: the tap and shift sit
    on the from side, so ``I_f = y_ff V_f + y_ft V_t`` and
    ``I_t = y_tf V_f + y_tt V_t``.
    """
    if not (r * r + x * x > 0.0):
        raise ValueError("branch has zero series impedance (r = x = 0)")
    if not tap_ratio > 0.0:
        raise ValueError(f"tap ratio must be positive, got {tap_ratio}")
    y = 1.0 / complex(r, x)
    y_sh = complex(0.0, b_charge / 2.0)
    y_tt = y + y_sh
    y_ff = y_tt / (tap_ratio * tap_ratio)
    y_ft = -y / (tap_ratio * cmath.exp(-1j * phase_shift))
    y_tf = -y / (tap_ratio * cmath.exp(1j * phase_shift))
    return y_ff, y_ft, y_tf, y_tt


def mw_to_pu(value, base_mva: float):
    return np.asarray(value, dtype=float) / base_mva


def pu_to_mw(value, base_mva: float):
    return np.asarray(value, dtype=float) * base_mva


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable per-unit network.

    Exactly one generator per bus (``generators[i].bus == i``). Costs are in
    $/pu·h. The array properties below are cached views used by the numerical
    code; treat them as read-only.
    """

    base_mva: float
    buses: Tuple[Bus, ...]
    generators: Tuple[Generator, ...]
    branches: Tuple[BranchAdmittance, ...]
    ref_p_d: np.ndarray
    ref_q_d: np.ndarray
    name: str = "network"
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "branches", tuple(self.branches))
        for attr in ("ref_p_d", "ref_q_d"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    def _cached(self, key, fn):
        if key not in self._arrays:
            arr = fn()
            arr.setflags(write=False)
            self._arrays[key] = arr
        return self._arrays[key]

    # bus data
    @property
    def shunt_g(self) -> np.ndarray:
        return self._cached("gs", lambda: np.array([b.shunt_g for b in self.buses], dtype=float))

    @property
    def shunt_b(self) -> np.ndarray:
        return self._cached("bs", lambda: np.array([b.shunt_b for b in self.buses], dtype=float))

    @property
    def v_min(self) -> np.ndarray:
        return self._cached("vmin", lambda: np.array([b.v_min for b in self.buses], dtype=float))

    @property
    def v_max(self) -> np.ndarray:
        return self._cached("vmax", lambda: np.array([b.v_max for b in self.buses], dtype=float))

    # generator data
    @property
    def cost(self) -> np.ndarray:
        return self._cached("c", lambda: np.array([g.cost for g in self.generators], dtype=float))

    @property
    def p_min(self) -> np.ndarray:
        return self._cached("pmin", lambda: np.array([g.p_min for g in self.generators], dtype=float))

    @property
    def p_max(self) -> np.ndarray:
        return self._cached("pmax", lambda: np.array([g.p_max for g in self.generators], dtype=float))

    @property
    def q_min(self) -> np.ndarray:
        return self._cached("qmin", lambda: np.array([g.q_min for g in self.generators], dtype=float))

    @property
    def q_max(self) -> np.ndarray:
        return self._cached("qmax", lambda: np.array([g.q_max for g in self.generators], dtype=float))

    # branch data
    @property
    def from_idx(self) -> np.ndarray:
        return self._cached("f", lambda: np.array([br.from_bus for br in self.branches], dtype=np.intp))

    @property
    def to_idx(self) -> np.ndarray:
        return self._cached("t", lambda: np.array([br.to_bus for br in self.branches], dtype=np.intp))

    @property
    def s_max(self) -> np.ndarray:
        return self._cached("smax", lambda: np.array([br.s_max for br in self.branches], dtype=float))

    def _y(self, name: str) -> np.ndarray:
        return self._cached(name, lambda: np.array([getattr(br, name) for br in self.branches], dtype=complex))

    @property
    def y_ff(self) -> np.ndarray:
        return self._y("y_ff")

    @property
    def y_ft(self) -> np.ndarray:
        return self._y("y_ft")

    @property
    def y_tf(self) -> np.ndarray:
        return self._y("y_tf")

    @property
    def y_tt(self) -> np.ndarray:
        return self._y("y_tt")

    def ybus(self) -> np.ndarray:
        """Dense bus admittance matrix including shunts."""

        def build():
            n = self.n_bus
            Y = np.zeros((n, n), dtype=complex)
            f, t = self.from_idx, self.to_idx
            np.add.at(Y, (f, f), self.y_ff)
            np.add.at(Y, (f, t), self.y_ft)
            np.add.at(Y, (t, f), self.y_tf)
            np.add.at(Y, (t, t), self.y_tt)
            Y[np.diag_indices(n)] += self.shunt_g + 1j * self.shunt_b
            return Y

        return self._cached("ybus", build)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "n_bus": self.n_bus,
            "n_branch": self.n_branch,
            "n_gen": sum(1 for g in self.generators if g != Generator.dummy(g.bus)),
        }


def validate_network(net: Network) -> List[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    n = len(net.buses)
    for k, bus in enumerate(net.buses):
        if bus.id != k:
            problems.append(f"bus {k}: id {bus.id} is not its dense index")
        if not (0.0 < bus.v_min <= bus.v_max):
            problems.append(f"bus {k}: voltage bounds must satisfy 0 < v_min <= v_max (got {bus.v_min}, {bus.v_max})")
        if not (math.isfinite(bus.shunt_g) and math.isfinite(bus.shunt_b)):
            problems.append(f"bus {k}: non-finite shunt admittance")
    if len(net.generators) != n:
        problems.append(f"network: {len(net.generators)} generators for {n} buses (need exactly one per bus)")
    for k, gen in enumerate(net.generators):
        if gen.bus != k:
            problems.append(f"generator {k}: attached to bus {gen.bus}, expected {k}")
        if not gen.p_min <= gen.p_max:
            problems.append(f"generator {k}: p_min > p_max")
        if not gen.q_min <= gen.q_max:
            problems.append(f"generator {k}: q_min > q_max")
        if not math.isfinite(gen.cost):
            problems.append(f"generator {k}: non-finite cost")
    seen = set()
    for k, br in enumerate(net.branches):
        for end in (br.from_bus, br.to_bus):
            if not 0 <= end < n:
                problems.append(f"branch {k}: endpoint {end} is not a valid bus index")
        if br.from_bus == br.to_bus:
            problems.append(f"branch {k}: self loop at bus {br.from_bus}")
        if (br.from_bus, br.to_bus) in seen:
            problems.append(f"branch {k}: duplicate branch {br.from_bus}->{br.to_bus}")
        seen.add((br.from_bus, br.to_bus))
        if not br.s_max >= 0.0:
            problems.append(f"branch {k}: s_max must be >= 0")
        vals = [br.y_ff, br.y_ft, br.y_tf, br.y_tt]
        if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in vals):
            problems.append(f"branch {k}: non-finite admittance entry")
    if np.shape(net.ref_p_d) != (n,) or np.shape(net.ref_q_d) != (n,):
        problems.append("network: reference load has wrong length")
    return problems


def make_network(
    buses: Sequence[Bus],
    generators: Sequence[Generator],
    lines: Sequence[dict],
    p_d: Sequence[float],
    q_d: Sequence[float],
    base_mva: float = 100.0,
    name: str = "network",
) -> Network:
    """Build a network from per-unit line parameters.

    Each entry of ``lines`` holds ``from``, ``to``, ``r``, ``x`` and optionally
    ``b``, ``tap``, ``shift`` (radians) and ``s_max``.
    """
    branches = []
    for ln in lines:
        y = build_branch_admittance(ln.get("r", 0.0), ln["x"], ln.get("b", 0.0), ln.get("tap", 1.0), ln.get("shift", 0.0))
        branches.append(BranchAdmittance(int(ln["from"]), int(ln["to"]), *y, s_max=float(ln.get("s_max", 10.0))))
    return Network(base_mva, tuple(buses), tuple(generators), tuple(branches), np.asarray(p_d), np.asarray(q_d), name=name)
