"""Export the IEEE 118-bus case from PYPOWER into the workbench JSON schema and
freeze independent oracle values used by the Rust test-suite.

Usage: python3 scripts/export_ieee118.py
Requires: pypower, numpy, scipy
"""
import json
import os

import numpy as np
from pypower.api import case118, ppoption, runpf
from scipy.optimize import Bounds, LinearConstraint, milp

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "crates", "core", "data")
FIXTURES = os.path.join(ROOT, "crates", "core", "tests", "fixtures")

KIND = {1: "pq", 2: "pv", 3: "slack"}


def machine_dynamics(rating_mva):
    h = min(max(3.0 * rating_mva / 100.0, 2.0), 8.0)
    xd_prime = 0.25 * 100.0 / rating_mva
    return h, xd_prime, 1.0


def export():
    case = case118()
    base_mva = float(case["baseMVA"])
    bus, gen, branch = case["bus"], case["gen"], case["branch"]
    vg = {int(g[0]): float(g[5]) for g in gen}

    buses = []
    for b in bus:
        bid = int(b[0])
        kind = KIND[int(b[1])]
        buses.append({
            "id": bid,
            "kind": kind,
            "base_kv": float(b[9]),
            "voltage_setpoint": vg.get(bid, 1.0) if kind != "pq" else None,
            "shunt_g": float(b[4]),
            "shunt_b": float(b[5]),
        })

    branches = []
    for br in branch:
        branches.append({
            "from_bus": int(br[0]),
            "to_bus": int(br[1]),
            "r": float(br[2]),
            "x": float(br[3]),
            "b_shunt": float(br[4]),
            "tap": float(br[8]) if br[8] != 0 else 1.0,
            "in_service": bool(br[10]),
        })

    machines, dynamics = [], []
    for g in gen:
        rating = max(float(g[6]), float(g[8]))
        h, xd, d = machine_dynamics(rating)
        machines.append({
            "bus": int(g[0]),
            "rating_mva": rating,
            "p_set": float(g[1]),
            "q_limits": [float(g[4]), float(g[3])],
            "is_solar": False,
        })
        dynamics.append({"bus": int(g[0]), "rating_mva": rating, "h": h, "xd_prime": xd, "d": d})

    loads = [{"bus": int(b[0]), "p": float(b[2]), "q": float(b[3])}
             for b in bus if b[2] != 0 or b[3] != 0]

    net = {
        "name": "ieee118",
        "base_mva": base_mva,
        "machines_file": "machines118.json",
        "buses": buses,
        "branches": branches,
        "machines": machines,
        "loads": loads,
    }
    with open(os.path.join(DATA, "ieee118.json"), "w") as f:
        json.dump(net, f, indent=1)
    with open(os.path.join(DATA, "machines118.json"), "w") as f:
        json.dump({"machines": dynamics}, f, indent=1)
    return case


def pf_oracle(case):
    res, ok = runpf(case, ppoption(VERBOSE=0, OUT_ALL=0, ENFORCE_Q_LIMS=0, PF_TOL=1e-12))
    assert ok
    out = {
        "source": "PYPOWER runpf (Newton), reactive limits not enforced, tol 1e-12",
        "bus_ids": [int(b[0]) for b in res["bus"]],
        "v_mag": [float(b[7]) for b in res["bus"]],
        "v_ang_deg": [float(b[8]) for b in res["bus"]],
    }
    with open(os.path.join(FIXTURES, "ieee118_pf_oracle.json"), "w") as f:
        json.dump(out, f, indent=1)


def zero_injection_oracle(case, ids, idx):
    """Exact optimum under the zero-injection rule.

    y_j: PMU at j; d_k: bus k directly observed; e_(z,k): zero-injection bus z
    infers bus k of its closed neighbourhood (at most one per z); tau_k:
    inference order, forcing every other member of z's neighbourhood to be
    observed before k (big-M ordering rules out circular inference).
    """
    n = len(ids)
    nb = [set() for _ in range(n)]
    for br in case["branch"]:
        i, j = idx[int(br[0])], idx[int(br[1])]
        nb[i].add(j)
        nb[j].add(i)
    has_gen = {idx[int(g[0])] for g in case["gen"]}
    zi = [i for i, b in enumerate(case["bus"]) if b[2] == 0 and b[3] == 0 and i not in has_gen]
    groups = {z: [z] + sorted(nb[z]) for z in zi}
    pairs = [(z, k) for z in zi for k in groups[z]]
    p = len(pairs)
    oy, od, oe, ot = 0, n, 2 * n, 2 * n + p
    nv = 3 * n + p
    big = n + 1
    rows, lo, hi = [], [], []

    def add(coeffs, l, u):
        row = np.zeros(nv)
        for j, v in coeffs:
            row[j] += v
        rows.append(row)
        lo.append(l)
        hi.append(u)

    for k in range(n):
        add([(od + k, 1)] + [(oy + j, -1) for j in [k] + sorted(nb[k])], -np.inf, 0)
        add([(od + k, 1)] + [(oe + q, 1) for q, (_, kk) in enumerate(pairs) if kk == k], 1, np.inf)
    for z in zi:
        add([(oe + q, 1) for q, (zz, _) in enumerate(pairs) if zz == z], -np.inf, 1)
    for q, (z, k) in enumerate(pairs):
        for m in groups[z]:
            if m != k:
                add([(ot + k, 1), (ot + m, -1), (oe + q, -big)], 1 - big, np.inf)
    c = np.zeros(nv)
    c[:n] = 1
    integrality = np.r_[np.ones(2 * n + p), np.zeros(n)]
    bounds = Bounds(np.zeros(nv), np.r_[np.ones(2 * n + p), np.full(n, big)])
    res = milp(c, constraints=LinearConstraint(np.array(rows), lo, hi),
               integrality=integrality, bounds=bounds)
    assert res.success
    placed = [ids[i] for i in range(n) if res.x[i] > 0.5]
    return len(placed), placed


def placement_oracle(case):
    bus, branch = case["bus"], case["branch"]
    ids = [int(b[0]) for b in bus]
    idx = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    m = np.eye(n)
    for br in branch:
        i, j = idx[int(br[0])], idx[int(br[1])]
        m[i, j] = m[j, i] = 1
    res = milp(c=np.ones(n), constraints=LinearConstraint(m, lb=np.ones(n), ub=np.inf),
               integrality=np.ones(n), bounds=Bounds(0, 1))
    assert res.success
    placed = [ids[i] for i in range(n) if res.x[i] > 0.5]
    zi_count, zi_set = zero_injection_oracle(case, ids, idx)
    out = {
        "source": "scipy.optimize.milp (HiGHS) on M Y >= 1, unit costs",
        "optimal_count": len(placed),
        "one_optimal_set": placed,
        "zero_injection_source": "scipy.optimize.milp with inference-order variables",
        "zero_injection_optimal_count": zi_count,
        "zero_injection_one_optimal_set": zi_set,
    }
    with open(os.path.join(FIXTURES, "ieee118_placement_oracle.json"), "w") as f:
        json.dump(out, f, indent=1)


if __name__ == "__main__":
    c = export()
    pf_oracle(c)
    placement_oracle(c)
