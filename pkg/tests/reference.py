"""Independent reference implementations used only by the tests.

These deliberately avoid the package's tree-sweep and enumeration code paths:
the power-flow reference is a dense Gauss fixed point on the bus admittance
matrix, and the restoration maximizer is a plain recursive tree search. They
exist so the production implementations can be checked against independently
written logic.
"""

from __future__ import annotations

import numpy as np

from gridrestore.feeder import (
    Breaker,
    Bus,
    Feeder,
    Generator,
    Line,
    LoadPoint,
    MicrogridPartition,
)
from gridrestore.powerflow import check_constraints, solve


def random_radial_feeder(
    rng: np.random.Generator,
    max_buses: int = 10,
    max_breakers: int = 10,
) -> Feeder:
    """Small random tree feeder that passes validate_feeder.

    Generation is budgeted so the all-open state is always feasible (loads
    that have no breaker on their path are served in every configuration).
    """
    n_buses = int(rng.integers(3, max_buses + 1))
    buses = [Bus(f"b{i}") for i in range(n_buses)]
    lines = []
    parents = {0: None}
    for i in range(1, n_buses):
        parent = int(rng.integers(0, i))
        parents[i] = parent
        lines.append(
            Line(
                f"l{i}",
                f"b{parent}",
                f"b{i}",
                float(rng.uniform(0.001, 0.006)),
                float(rng.uniform(0.002, 0.012)),
                float(rng.uniform(2500.0, 6000.0)),
            )
        )
    loads = []
    for i in range(1, n_buses):
        if rng.random() < 0.7:
            p = float(np.round(rng.uniform(30.0, 300.0), 1))
            loads.append(
                LoadPoint(f"ld{i}", f"b{i}", p, round(p * 0.33, 1), 1.0, "")
            )
    if not loads:
        loads.append(LoadPoint("ld1", "b1", 100.0, 33.0, 1.0, ""))
    n_breakers = int(rng.integers(1, min(max_breakers, len(lines)) + 1))
    picked = rng.choice(len(lines), size=n_breakers, replace=False)
    breakers = [Breaker(f"cb{k}", lines[int(li)].id, 0) for k, li in enumerate(sorted(picked))]
    breakered_buses = {int(lines[int(li)].id[1:]) for li in picked}
    switchable = 0.0
    always_served = 0.0
    for ld in loads:
        bus = int(ld.bus_id[1:])
        on_path = False
        while bus is not None:
            if bus in breakered_buses:
                on_path = True
                break
            bus = parents[bus]
        if on_path:
            switchable += ld.p_rated
        else:
            always_served += ld.p_rated
    capacity = (
        always_served * float(rng.uniform(1.1, 1.4))
        + switchable * float(rng.uniform(0.2, 1.2))
        + 50.0
    )
    generators = [
        Generator("g0", "b0", 0.0, round(capacity, 1), 0.0, round(0.7 * capacity, 1))
    ]
    n_agents = int(rng.integers(1, min(3, n_breakers) + 1))
    split = sorted(rng.choice(range(1, n_breakers), size=n_agents - 1, replace=False)) if n_agents > 1 else []
    bounds = [0, *[int(s) for s in split], n_breakers]
    assignments = tuple(
        tuple(b.id for b in breakers[bounds[k]:bounds[k + 1]])
        for k in range(n_agents)
    )
    return Feeder(
        name="random",
        s_base_kva=1000.0,
        v_base_kv=4.16,
        buses=tuple(buses),
        lines=tuple(lines),
        breakers=tuple(breakers),
        loads=tuple(loads),
        generators=tuple(generators),
        partition=MicrogridPartition(assignments),
    )


def dense_reference_solve(feeder: Feeder, states, tol: float = 1e-8, max_iter: int = 300):
    """Implicit Z-bus Gauss power flow (dense linear algebra, no tree sweeps).

    Same modeling semantics as the production solver: conducting lines need
    every breaker closed, islands without generation are de-energized at
    1.0 p.u., generation is dispatched proportionally to p_max with the
    largest generator as slack. Returns (voltage magnitudes by bus id,
    total losses kW, converged).
    """
    s_base = feeder.s_base_kva
    bus_pos = {b.id: i for i, b in enumerate(feeder.buses)}
    n = len(feeder.buses)
    breakers_by_line: dict[str, list[int]] = {}
    for bi, brk in enumerate(feeder.breakers):
        breakers_by_line.setdefault(brk.line_id, []).append(bi)
    conducting = [
        all(states[bi] for bi in breakers_by_line.get(ln.id, []))
        for ln in feeder.lines
    ]

    # Components by repeated BFS.
    adj: list[list[int]] = [[] for _ in range(n)]
    lines_between: list[tuple[int, int, complex]] = []
    for ln, cond in zip(feeder.lines, conducting):
        if not cond:
            continue
        f, t = bus_pos[ln.from_bus], bus_pos[ln.to_bus]
        adj[f].append(t)
        adj[t].append(f)
        lines_between.append((f, t, complex(ln.resistance, ln.reactance)))
    comp = [-1] * n
    for start in range(n):
        if comp[start] != -1:
            continue
        comp[start] = start
        queue = [start]
        while queue:
            u = queue.pop()
            for v in adj[u]:
                if comp[v] == -1:
                    comp[v] = start
                    queue.append(v)

    gen_comp = {comp[bus_pos[g.bus_id]] for g in feeder.generators}
    volts = {b.id: 1.0 for b in feeder.buses}
    total_loss_kw = 0.0
    converged = True

    for island in sorted(gen_comp):
        members = [i for i in range(n) if comp[i] == island]
        gens = [g for g in feeder.generators if comp[bus_pos[g.bus_id]] == island]
        root_gen = max(gens, key=lambda g: (g.p_max, -feeder.generators.index(g)))
        slack = bus_pos[root_gen.bus_id]
        local = {b: k for k, b in enumerate(members)}
        m = len(members)
        y = np.zeros((m, m), dtype=complex)
        island_lines = [
            (f, t, z) for (f, t, z) in lines_between if comp[f] == island
        ]
        for f, t, z in island_lines:
            a = 1.0 / z if z != 0 else 1e12
            y[local[f], local[f]] += a
            y[local[t], local[t]] += a
            y[local[f], local[t]] -= a
            y[local[t], local[f]] -= a
        s_load = np.zeros(m, dtype=complex)
        for ld in feeder.loads:
            b = bus_pos[ld.bus_id]
            if comp[b] == island:
                s_load[local[b]] += complex(ld.p_rated, ld.q_rated) / s_base
        others = [k for k in range(m) if k != local[slack]]
        v = np.ones(m, dtype=complex)
        loss_pu = 0.0
        ok = False
        for _ in range(max_iter):
            island_p = float(s_load.real.sum())
            island_q = float(s_load.imag.sum())
            p_cap = sum(g.p_max for g in gens)
            q_cap = sum(g.q_max for g in gens)
            f_p = min(1.0, (island_p + loss_pu) * s_base / p_cap) if p_cap else 0.0
            f_q = min(1.0, island_q * s_base / q_cap) if q_cap else 0.0
            s_inj = np.zeros(m, dtype=complex)
            for g in gens:
                if g is root_gen:
                    continue
                p = float(np.clip(g.p_max * f_p, g.p_min, g.p_max))
                q = float(np.clip(g.q_max * f_q, g.q_min, g.q_max))
                s_inj[local[bus_pos[g.bus_id]]] += complex(p, q) / s_base
            current = np.conj((s_inj - s_load) / v)
            if others:
                rhs = current[others] - y[np.ix_(others, [local[slack]])] @ np.array(
                    [v[local[slack]]]
                )
                v_new = v.copy()
                v_new[others] = np.linalg.solve(y[np.ix_(others, others)], rhs)
            else:
                v_new = v.copy()
            v_new[local[slack]] = 1.0
            dv = float(np.max(np.abs(v_new - v))) if m else 0.0
            v = v_new
            loss_pu = 0.0
            for f, t, z in island_lines:
                if z == 0:
                    continue
                i_line = (v[local[f]] - v[local[t]]) / z
                loss_pu += z.real * abs(i_line) ** 2
            if dv < tol:
                ok = True
                break
        if not ok or not np.all(np.isfinite(v)):
            converged = False
        total_loss_kw += loss_pu * s_base
        for b in members:
            volts[feeder.buses[b].id] = float(abs(v[local[b]]))
    return volts, total_loss_kw, converged


def recursive_best(feeder: Feeder):
    """Recursive tree search over breaker assignments (reference maximizer).

    Identical objective and tie-break semantics to the oracle: maximize
    weighted restored power, then fewest closed breakers, then smallest
    state vector lexicographically.
    """
    n = feeder.n_breakers
    best: dict = {"key": None, "states": None, "weighted": 0.0, "served": 0.0}

    def descend(prefix: list[int]):
        if len(prefix) == n:
            states = tuple(prefix)
            solution = solve(feeder, states)
            report = check_constraints(feeder, solution)
            if not report.all_ok:
                return
            key = (-solution.served_weighted_kw, sum(states), states)
            if best["key"] is None or key < best["key"]:
                best.update(
                    key=key,
                    states=states,
                    weighted=solution.served_weighted_kw,
                    served=solution.served_load_kw,
                )
            return
        for bit in (0, 1):
            descend(prefix + [bit])

    descend([])
    return best["states"], best["weighted"], best["served"]
