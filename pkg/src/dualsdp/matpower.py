"""Reader for the subset of the MATPOWER ``.m`` case format used by PGLib.

Only ``mpc.baseMVA`` and the numeric matrices ``mpc.bus``, ``mpc.gen``,
``mpc.branch`` and ``mpc.gencost`` are read. This is a line-oriented matrix
extractor, not a MATLAB interpreter: anything other than plain decimal numbers
inside a matrix is an error.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .grid import Bus, BranchAdmittance, Generator, Network, build_branch_admittance

TABLES = ("bus", "gen", "branch", "gencost")

# minimum column counts for the columns we read
MIN_COLS = {"bus": 13, "gen": 10, "branch": 11, "gencost": 4}

# bus columns
BUS_I, BUS_TYPE, PD, QD, GS, BS, VMAX, VMIN = 0, 1, 2, 3, 4, 5, 11, 12
# gen columns
GEN_BUS, QMAX, QMIN, GEN_STATUS, PMAX, PMIN = 0, 3, 4, 7, 8, 9
# branch columns
F_BUS, T_BUS, BR_R, BR_X, BR_B, RATE_A, TAP, SHIFT, BR_STATUS, ANGMIN, ANGMAX = 0, 1, 2, 3, 4, 5, 8, 9, 10, 11, 12

# rateA = 0 means "unlimited"; replaced by this multiple of the total apparent load
NO_LIMIT_FACTOR = 10.0

# MATPOWER files use huge numbers (often 1e30) for "no bound"
HUGE = 1e10

logger = logging.getLogger(__name__)

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_MATRIX_START = re.compile(r"^\s*mpc\.(\w+)\s*=\s*\[(.*)$")
_SCALAR = re.compile(r"^\s*mpc\.baseMVA\s*=\s*([^;%]+);?")


class CaseParseError(ValueError):
    """Malformed case text. Carries the source name and 1-based line number when known."""

    def __init__(self, message: str, source: str = "<string>", line: Optional[int] = None):
        self.source = source
        self.line = line
        self.reason = message
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class CaseLoweringError(ValueError):
    """Case parses but falls outside the supported model (e.g. nonlinear cost)."""


@dataclass
class RawCase:
    base_mva: float
    bus: np.ndarray
    gen: np.ndarray
    branch: np.ndarray
    gencost: np.ndarray
    source: str = "<string>"

    def __eq__(self, other):
        if not isinstance(other, RawCase):
            return NotImplemented
        return self.base_mva == other.base_mva and all(
            np.array_equal(getattr(self, t), getattr(other, t)) for t in TABLES
        )


def _strip_comment(line: str) -> str:
    # MATPOWER case files have no '%' inside strings we care about
    return line.split("%", 1)[0]


def parse_case(text: str, source: str = "<string>") -> RawCase:
    """Extract base MVA and the four tables from case text."""
    lines = text.splitlines()
    base_mva = None
    tables: Dict[str, List[List[float]]] = {}
    i = 0
    while i < len(lines):
        raw = _strip_comment(lines[i])
        m = _SCALAR.match(raw)
        if m:
            tok = m.group(1).strip()
            if not _NUMBER.match(tok):
                raise CaseParseError(f"malformed number {tok!r} for baseMVA", source, i + 1)
            base_mva = float(tok)
            i += 1
            continue
        m = _MATRIX_START.match(raw)
        if m and m.group(1) in TABLES:
            name = m.group(1)
            rows: List[List[float]] = []
            rest = m.group(2)
            lineno = i + 1
            closed = False
            while True:
                body, sep, _ = rest.partition("]")
                for chunk in body.split(";"):
                    toks = chunk.replace(",", " ").split()
                    if not toks:
                        continue
                    row = []
                    for tok in toks:
                        if not _NUMBER.match(tok):
                            raise CaseParseError(f"malformed number {tok!r} in mpc.{name}", source, lineno)
                        row.append(float(tok))
                    rows.append(row)
                if sep:
                    closed = True
                    break
                i += 1
                if i >= len(lines):
                    break
                rest = _strip_comment(lines[i])
                lineno = i + 1
            if not closed:
                raise CaseParseError(f"unterminated matrix mpc.{name}", source, lineno)
            tables[name] = rows
        i += 1

    if base_mva is None:
        raise CaseParseError("missing table baseMVA", source)
    if not (math.isfinite(base_mva) and base_mva > 0):
        raise CaseParseError(f"baseMVA must be positive, got {base_mva}", source)
    arrays = {}
    for name in TABLES:
        if name not in tables:
            raise CaseParseError(f"missing table {name}", source)
        rows = tables[name]
        if not rows:
            raise CaseParseError(f"table {name} is empty", source)
        width = min(len(r) for r in rows)
        if name != "gencost" and any(len(r) != len(rows[0]) for r in rows):
            raise CaseParseError(f"ragged rows in table {name}", source)
        if width < MIN_COLS[name]:
            raise CaseParseError(f"table {name} needs at least {MIN_COLS[name]} columns, found {width}", source)
        if name == "gencost":
            # rows may have different lengths when NCOST differs; pad with nan
            full = max(len(r) for r in rows)
            arr = np.full((len(rows), full), np.nan)
            for k, r in enumerate(rows):
                arr[k, : len(r)] = r
        else:
            arr = np.array(rows, dtype=float)
        if not np.all(np.isfinite(arr[~np.isnan(arr)])):
            raise CaseParseError(f"non-finite value in table {name}", source)
        arrays[name] = arr
    return RawCase(base_mva=base_mva, source=source, **arrays)


def read_case(path: Union[str, Path]) -> RawCase:
    path = Path(path)
    return parse_case(path.read_text(), source=str(path))


def _linear_cost(row: np.ndarray, k: int) -> float:
    """Linear coefficient ($/MWh) of a polynomial gencost row, rejecting anything else."""
    model = int(row[0])
    if model != 2:
        raise CaseLoweringError(f"gencost row {k}: model {model} unsupported (only polynomial model 2; nonlinear cost)")
    ncost = int(row[3])
    coeffs = row[4 : 4 + ncost]
    if len(coeffs) != ncost or np.any(np.isnan(coeffs)):
        raise CaseLoweringError(f"gencost row {k}: expected {ncost} coefficients")
    # highest degree first
    for degree, c in zip(range(ncost - 1, -1, -1), coeffs):
        if degree >= 2 and c != 0.0:
            raise CaseLoweringError(
                f"gencost row {k}: nonlinear cost (degree-{degree} coefficient {c}); only linear costs are supported"
            )
    return float(coeffs[-2]) if ncost >= 2 else 0.0


def lower_case(raw: RawCase, name: Optional[str] = None) -> Network:
    """Convert a parsed case into a per-unit ``Network``.

    Out-of-service units and branches are dropped, bus numbers are remapped to
    dense indices in file order, and every bus without an in-service generator
    gets a zero-bound dummy.
    """
    base = raw.base_mva
    bus_ids = raw.bus[:, BUS_I].astype(int)
    if len(set(bus_ids)) != len(bus_ids):
        raise CaseLoweringError("duplicate bus numbers in bus table")
    index = {b: k for k, b in enumerate(bus_ids)}
    n = len(bus_ids)

    buses = []
    for k, row in enumerate(raw.bus):
        buses.append(Bus(id=k, shunt_g=row[GS] / base, shunt_b=row[BS] / base, v_min=float(row[VMIN]), v_max=float(row[VMAX])))
    p_d = raw.bus[:, PD] / base
    q_d = raw.bus[:, QD] / base

    if raw.gencost.shape[0] < raw.gen.shape[0]:
        raise CaseLoweringError("gencost has fewer rows than gen")
    gens: List[Optional[Generator]] = [None] * n
    for k, row in enumerate(raw.gen):
        if row[GEN_STATUS] <= 0:
            continue
        b = int(row[GEN_BUS])
        if b not in index:
            raise CaseLoweringError(f"generator {k} references unknown bus {b}")
        i = index[b]
        if gens[i] is not None:
            raise CaseLoweringError(f"bus {b} has more than one in-service generator (duplicate generator)")
        c = _linear_cost(raw.gencost[k], k)
        gens[i] = Generator(
            bus=i,
            cost=c * base,
            p_min=row[PMIN] / base,
            p_max=row[PMAX] / base,
            q_min=row[QMIN] / base,
            q_max=row[QMAX] / base,
        )
    generators = [g if g is not None else Generator.dummy(i) for i, g in enumerate(gens)]
    for g in generators:
        if max(abs(g.p_min), abs(g.p_max), abs(g.q_min), abs(g.q_max)) * base >= HUGE:
            logger.warning("generator at bus %d has an effectively unbounded limit; bounds enter the dual objective as-is", g.bus)

    no_limit = NO_LIMIT_FACTOR * float(np.sum(np.abs(p_d + 1j * q_d)))
    if no_limit <= 0.0:
        no_limit = NO_LIMIT_FACTOR
    branches = []
    seen = {}
    for k, row in enumerate(raw.branch):
        if row[BR_STATUS] <= 0:
            continue
        f, t = int(row[F_BUS]), int(row[T_BUS])
        if f not in index or t not in index:
            raise CaseLoweringError(f"branch {k} references unknown bus ({f}, {t})")
        pair = frozenset((index[f], index[t]))
        if pair in seen:
            raise CaseLoweringError(f"parallel branches between buses {f} and {t} (rows {seen[pair]} and {k})")
        seen[pair] = k
        tap = row[TAP] if row[TAP] != 0.0 else 1.0
        try:
            y = build_branch_admittance(row[BR_R], row[BR_X], row[BR_B], tap, math.radians(row[SHIFT]))
        except ValueError as exc:
            raise CaseLoweringError(f"branch {k}: {exc}") from None
        s_max = row[RATE_A] / base if row[RATE_A] > 0 else no_limit
        branches.append(BranchAdmittance(index[f], index[t], *y, s_max=s_max))

    return Network(
        base_mva=base,
        buses=tuple(buses),
        generators=tuple(generators),
        branches=tuple(branches),
        ref_p_d=p_d,
        ref_q_d=q_d,
        name=name or Path(raw.source).stem,
    )


def load_network(path: Union[str, Path]) -> Network:
    return lower_case(read_case(path))
