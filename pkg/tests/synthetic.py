"""Synthetic MATPOWER-format cases of arbitrary size for throughput checks."""

import numpy as np


def synthetic_case_text(n_bus=118, n_gen=54, extra_lines=60, seed=0):
    """Ring plus random chords, linear costs, loads on every non-generator bus."""
    rng = np.random.default_rng(seed)
    gen_buses = np.sort(rng.choice(n_bus, n_gen, replace=False)) + 1
    bus_rows = []
    for b in range(1, n_bus + 1):
        kind = 3 if b == gen_buses[0] else (2 if b in gen_buses else 1)
        pd = 0.0 if b in gen_buses else rng.uniform(10, 60)
        qd = 0.3 * pd
        bus_rows.append(f"\t{b}\t{kind}\t{pd:.3f}\t{qd:.3f}\t0\t0\t1\t1\t0\t138\t1\t1.06\t0.94;")
    gen_rows, cost_rows = [], []
    for b in gen_buses:
        pmax = rng.uniform(100, 400)
        gen_rows.append(f"\t{b}\t0\t0\t{0.5 * pmax:.3f}\t{-0.5 * pmax:.3f}\t1\t100\t1\t{pmax:.3f}\t0;")
        cost_rows.append(f"\t2\t0\t0\t3\t0\t{rng.uniform(10, 40):.3f}\t0;")
    pairs = {(k, k % n_bus + 1) for k in range(1, n_bus + 1)}
    while len(pairs) < n_bus + extra_lines:
        a, b = sorted(rng.choice(n_bus, 2, replace=False) + 1)
        if (a, b) not in pairs and (b, a) not in pairs:
            pairs.add((a, b))
    branch_rows = []
    for a, b in sorted(pairs):
        r, x = rng.uniform(0.005, 0.05), rng.uniform(0.03, 0.3)
        branch_rows.append(f"\t{a}\t{b}\t{r:.5f}\t{x:.5f}\t{rng.uniform(0, 0.05):.4f}\t300\t300\t300\t0\t0\t1\t-30\t30;")
    return "\n".join(
        [
            "function mpc = synthetic",
            "mpc.version = '2';",
            "mpc.baseMVA = 100;",
            "mpc.bus = [",
            *bus_rows,
            "];",
            "mpc.gen = [",
            *gen_rows,
            "];",
            "mpc.branch = [",
            *branch_rows,
            "];",
            "mpc.gencost = [",
            *cost_rows,
            "];",
            "",
        ]
    )
