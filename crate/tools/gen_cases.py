#!/usr/bin/env python3
"""Generate the benchmark case fixtures in cases/.

Solves an AC power flow for each benchmark (standard published network data)
and freezes the solved operating point into the JSON case files consumed by
the toolkit.  Regenerate with:  python3 tools/gen_cases.py
"""

import json
import math
import os
import numpy as np

BASE_MVA = 100.0
OUT_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "cases")


def solve_pf(n, slack, pv, pd, qd, vset, pg, branches, tol=1e-10, max_iter=40):
    """Newton-Raphson AC power flow.

    n: bus count (ids 0..n-1 here), slack: bus index, pv: set of PV bus indices,
    pd/qd: load vectors (pu), vset: voltage setpoints for slack+PV, pg: generation (pu),
    branches: list of (f, t, r, x, b_total, tap).
    Returns (V, theta, P_injected, Q_injected).
    """
    ybus = np.zeros((n, n), dtype=complex)
    for (f, t, r, x, b, tap) in branches:
        y = 1.0 / complex(r, x)
        ysh = complex(0.0, b / 2.0)
        ybus[f, f] += (y + ysh) / (tap * tap)
        ybus[t, t] += y + ysh
        ybus[f, t] += -y / tap
        ybus[t, f] += -y / tap

    v = np.ones(n)
    th = np.zeros(n)
    for i in range(n):
        if i == slack or i in pv:
            v[i] = vset[i]

    p_sched = pg - pd
    q_sched = -qd
    pq = [i for i in range(n) if i != slack and i not in pv]
    ang_idx = [i for i in range(n) if i != slack]

    for _ in range(max_iter):
        vc = v * np.exp(1j * th)
        s = vc * np.conj(ybus @ vc)
        dp = p_sched - s.real
        dq = q_sched - s.imag
        mis = np.concatenate([dp[ang_idx], dq[pq]])
        if np.max(np.abs(mis)) < tol:
            break

        # Jacobian blocks (standard polar formulation)
        g, b = ybus.real, ybus.imag
        j11 = np.zeros((n, n))
        j12 = np.zeros((n, n))
        j21 = np.zeros((n, n))
        j22 = np.zeros((n, n))
        for i in range(n):
            for k in range(n):
                if i == k:
                    j11[i, i] = -s[i].imag - b[i, i] * v[i] ** 2
                    j12[i, i] = s[i].real / v[i] + g[i, i] * v[i]
                    j21[i, i] = s[i].real - g[i, i] * v[i] ** 2
                    j22[i, i] = s[i].imag / v[i] - b[i, i] * v[i]
                else:
                    dth = th[i] - th[k]
                    gc = g[i, k] * math.cos(dth) + b[i, k] * math.sin(dth)
                    gs = g[i, k] * math.sin(dth) - b[i, k] * math.cos(dth)
                    j11[i, k] = v[i] * v[k] * gs
                    j12[i, k] = v[i] * gc
                    j21[i, k] = -v[i] * v[k] * gc
                    j22[i, k] = v[i] * gs
        top = np.hstack([j11[np.ix_(ang_idx, ang_idx)], j12[np.ix_(ang_idx, pq)]])
        bot = np.hstack([j21[np.ix_(pq, ang_idx)], j22[np.ix_(pq, pq)]])
        jac = np.vstack([top, bot])
        dx = np.linalg.solve(jac, mis)
        th[ang_idx] += dx[: len(ang_idx)]
        v[pq] += dx[len(ang_idx):]
    else:
        raise RuntimeError("power flow did not converge")

    vc = v * np.exp(1j * th)
    s = vc * np.conj(ybus @ vc)
    return v, th, s.real + pd, s.imag + qd


def emit(name, freq, buses, branches, machines, devices, note=None):
    case = {
        "system": {"name": name, "base_mva": BASE_MVA, "frequency_hz": freq},
        "buses": buses,
        "branches": branches,
        "machines": machines,
        "devices": devices,
    }
    if note:
        case["system"]["note"] = note
    os.makedirs(OUT_DIR, exist_ok=True)
    path = os.path.join(OUT_DIR, f"{name}.json")
    with open(path, "w") as fh:
        json.dump(case, fh, indent=1)
        fh.write("\n")
    print(f"wrote {path}")


def build_case(name, freq, bus_ids, loads, branch_rows, gens, slack_gen, note=None,
               drop_machines=(), extra_load=None):
    """loads: {bus: (P_MW, Q_MVAr)}; branch_rows: (f, t, r, x, b, tap);
    gens: list of (bus, Pg_MW, Vset, H, xd_prime); slack_gen: index into gens."""
    idx = {b: i for i, b in enumerate(bus_ids)}
    n = len(bus_ids)
    pd = np.zeros(n)
    qd = np.zeros(n)
    for b, (p, q) in loads.items():
        pd[idx[b]] += p / BASE_MVA
        qd[idx[b]] += q / BASE_MVA
    vset = np.ones(n)
    pg = np.zeros(n)
    pv = set()
    slack = idx[gens[slack_gen][0]]
    for gi, (b, p, vs, _h, _xd) in enumerate(gens):
        vset[idx[b]] = vs
        pg[idx[b]] += p / BASE_MVA
        if gi != slack_gen:
            pv.add(idx[b])
    br = [(idx[f], idx[t], r, x, b, tap) for (f, t, r, x, b, tap) in branch_rows]
    v, th, p_inj, q_inj = solve_pf(n, slack, pv, pd, qd, vset, pg, br)
    print(f"{name}: PF converged, V in [{v.min():.4f}, {v.max():.4f}], "
          f"slack P = {(p_inj[slack] + pd[slack]) * BASE_MVA:.1f} MW")

    buses = []
    for b in bus_ids:
        i = idx[b]
        buses.append({
            "id": b,
            "name": f"Bus {b}",
            "voltage_mag": round(v[i], 8),
            "voltage_ang_deg": round(math.degrees(th[i]), 8),
            "p_load": round(pd[i], 8),
            "q_load": round(qd[i], 8),
        })
    branches = []
    for (f, t, r, x, b, _tap) in branch_rows:
        row = {"from": f, "to": t, "reactance": x, "status": True}
        if r:
            row["resistance"] = r
        branches.append(row)
    machines = []
    removed_load = {}
    for gi, (b, _p, _vs, h, xd) in enumerate(gens):
        i = idx[b]
        p_gen = p_inj[i] + pd[i]
        q_gen = q_inj[i] + qd[i]
        if gi in drop_machines:
            removed_load[b] = (p_gen, q_gen)
            continue
        machines.append({
            "id": gi + 1,
            "bus": b,
            "inertia_h": h,
            "damping_d": 0.0,
            "xd_prime": xd,
            "p_gen": round(p_gen, 8),
            "q_gen": round(q_gen, 8),
        })
    # fold removed machines into (negative) bus load so the operating point is unchanged
    for b, (p_gen, q_gen) in removed_load.items():
        for row in buses:
            if row["id"] == b:
                row["p_load"] = round(row["p_load"] - p_gen, 8)
                row["q_load"] = round(row["q_load"] - q_gen, 8)
    if extra_load:
        for b, (p, q) in extra_load.items():
            for row in buses:
                if row["id"] == b:
                    row["p_load"] = round(row["p_load"] + p, 8)
                    row["q_load"] = round(row["q_load"] + q, 8)
    emit(name, freq, buses, branches, machines, [], note)


BASE_NOTE = ("all quantities per unit on the 100 MVA system base; machine inertia "
             "constants H in seconds on the same base")


def wscc9():
    bus_ids = list(range(1, 10))
    loads = {5: (125, 50), 6: (90, 30), 8: (100, 35)}
    rows = [
        (1, 4, 0.0, 0.0576, 0.0, 1.0),
        (2, 7, 0.0, 0.0625, 0.0, 1.0),
        (3, 9, 0.0, 0.0586, 0.0, 1.0),
        (4, 5, 0.010, 0.085, 0.176, 1.0),
        (4, 6, 0.017, 0.092, 0.158, 1.0),
        (5, 7, 0.032, 0.161, 0.306, 1.0),
        (6, 9, 0.039, 0.170, 0.358, 1.0),
        (7, 8, 0.0085, 0.072, 0.149, 1.0),
        (8, 9, 0.0119, 0.1008, 0.209, 1.0),
    ]
    gens = [
        (1, 0.0, 1.040, 23.64, 0.0608),
        (2, 163.0, 1.025, 6.40, 0.1198),
        (3, 85.0, 1.025, 3.01, 0.1813),
    ]
    build_case("wscc9", 60.0, bus_ids, loads, rows, gens, 0, note=BASE_NOTE)


IEEE39_ROWS = [
    (1, 2, 0.0035, 0.0411, 0.6987, 1.0),
    (1, 39, 0.0010, 0.0250, 0.7500, 1.0),
    (2, 3, 0.0013, 0.0151, 0.2572, 1.0),
    (2, 25, 0.0070, 0.0086, 0.1460, 1.0),
    (2, 30, 0.0000, 0.0181, 0.0000, 1.025),
    (3, 4, 0.0013, 0.0213, 0.2214, 1.0),
    (3, 18, 0.0011, 0.0133, 0.2138, 1.0),
    (4, 5, 0.0008, 0.0128, 0.1342, 1.0),
    (4, 14, 0.0008, 0.0129, 0.1382, 1.0),
    (5, 6, 0.0002, 0.0026, 0.0434, 1.0),
    (5, 8, 0.0008, 0.0112, 0.1476, 1.0),
    (6, 7, 0.0006, 0.0092, 0.1130, 1.0),
    (6, 11, 0.0007, 0.0082, 0.1389, 1.0),
    (6, 31, 0.0000, 0.0250, 0.0000, 1.070),
    (7, 8, 0.0004, 0.0046, 0.0780, 1.0),
    (8, 9, 0.0023, 0.0363, 0.3804, 1.0),
    (9, 39, 0.0010, 0.0250, 1.2000, 1.0),
    (10, 11, 0.0004, 0.0043, 0.0729, 1.0),
    (10, 13, 0.0004, 0.0043, 0.0729, 1.0),
    (10, 32, 0.0000, 0.0200, 0.0000, 1.070),
    (12, 11, 0.0016, 0.0435, 0.0000, 1.006),
    (12, 13, 0.0016, 0.0435, 0.0000, 1.006),
    (13, 14, 0.0009, 0.0101, 0.1723, 1.0),
    (14, 15, 0.0018, 0.0217, 0.3660, 1.0),
    (15, 16, 0.0009, 0.0094, 0.1710, 1.0),
    (16, 17, 0.0007, 0.0089, 0.1342, 1.0),
    (16, 19, 0.0016, 0.0195, 0.3040, 1.0),
    (16, 21, 0.0008, 0.0135, 0.2548, 1.0),
    (16, 24, 0.0003, 0.0059, 0.0680, 1.0),
    (17, 18, 0.0007, 0.0082, 0.1319, 1.0),
    (17, 27, 0.0013, 0.0173, 0.3216, 1.0),
    (19, 20, 0.0007, 0.0138, 0.0000, 1.060),
    (19, 33, 0.0007, 0.0142, 0.0000, 1.070),
    (20, 34, 0.0009, 0.0180, 0.0000, 1.009),
    (21, 22, 0.0008, 0.0140, 0.2565, 1.0),
    (22, 23, 0.0006, 0.0096, 0.1846, 1.0),
    (22, 35, 0.0000, 0.0143, 0.0000, 1.025),
    (23, 24, 0.0022, 0.0350, 0.3610, 1.0),
    (23, 36, 0.0005, 0.0272, 0.0000, 1.000),
    (25, 26, 0.0032, 0.0323, 0.5310, 1.0),
    (25, 37, 0.0006, 0.0232, 0.0000, 1.025),
    (26, 27, 0.0014, 0.0147, 0.2396, 1.0),
    (26, 28, 0.0043, 0.0474, 0.7802, 1.0),
    (26, 29, 0.0057, 0.0625, 1.0290, 1.0),
    (28, 29, 0.0014, 0.0151, 0.2490, 1.0),
    (29, 38, 0.0008, 0.0156, 0.0000, 1.025),
]

IEEE39_LOADS = {
    3: (322.0, 2.4),
    4: (500.0, 184.0),
    7: (233.8, 84.0),
    8: (522.0, 176.0),
    12: (8.5, 88.0),
    15: (320.0, 153.0),
    16: (329.0, 32.3),
    18: (158.0, 30.0),
    20: (628.0, 103.0),
    21: (274.0, 115.0),
    23: (247.5, 84.6),
    24: (308.6, -92.2),
    25: (224.0, 47.2),
    26: (139.0, 17.0),
    27: (281.0, 75.5),
    28: (206.0, 27.6),
    29: (283.5, 26.9),
    31: (9.2, 4.6),
    39: (1104.0, 250.0),
}

IEEE39_GENS = [
    (39, 1000.0, 1.0300, 500.0, 0.0060),
    (31, 0.0, 0.9820, 30.3, 0.0697),
    (32, 650.0, 0.9831, 35.8, 0.0531),
    (33, 632.0, 0.9972, 28.6, 0.0436),
    (34, 508.0, 1.0123, 26.0, 0.1320),
    (35, 650.0, 1.0493, 34.8, 0.0500),
    (36, 560.0, 1.0635, 26.4, 0.0490),
    (37, 540.0, 1.0278, 24.3, 0.0570),
    (38, 830.0, 1.0265, 34.5, 0.0570),
    (30, 250.0, 1.0475, 42.0, 0.0310),
]


def ieee39():
    bus_ids = list(range(1, 40))
    build_case("ieee39", 60.0, bus_ids, IEEE39_LOADS, IEEE39_ROWS, IEEE39_GENS, 1,
                note=BASE_NOTE)


# NETS-NYPS 68-bus (16 machines).  Generator terminal buses 1-16, network
# buses 17-68; the NETS portion mirrors the New England network.
IEEE68_ROWS = [
    # generator step-up branches
    (1, 54, 0.0, 0.0181, 0.0, 1.0),
    (2, 58, 0.0, 0.0250, 0.0, 1.0),
    (3, 62, 0.0, 0.0200, 0.0, 1.0),
    (4, 19, 0.0007, 0.0142, 0.0, 1.0),
    (5, 20, 0.0009, 0.0180, 0.0, 1.0),
    (6, 22, 0.0, 0.0143, 0.0, 1.0),
    (7, 23, 0.0005, 0.0272, 0.0, 1.0),
    (8, 25, 0.0006, 0.0232, 0.0, 1.0),
    (9, 29, 0.0008, 0.0156, 0.0, 1.0),
    (10, 31, 0.0, 0.0260, 0.0, 1.0),
    (11, 32, 0.0, 0.0130, 0.0, 1.0),
    (12, 36, 0.0, 0.0075, 0.0, 1.0),
    (13, 17, 0.0, 0.0033, 0.0, 1.0),
    (14, 41, 0.0, 0.0015, 0.0, 1.0),
    (15, 42, 0.0, 0.0015, 0.0, 1.0),
    (16, 18, 0.0, 0.0030, 0.0, 1.0),
    # NETS network (New England)
    (53, 54, 0.0035, 0.0411, 0.6987, 1.0),
    (54, 55, 0.0013, 0.0151, 0.2572, 1.0),
    (54, 25, 0.0070, 0.0086, 0.1460, 1.0),
    (55, 56, 0.0013, 0.0213, 0.2214, 1.0),
    (55, 52, 0.0011, 0.0133, 0.2138, 1.0),
    (56, 57, 0.0008, 0.0128, 0.1342, 1.0),
    (56, 66, 0.0008, 0.0129, 0.1382, 1.0),
    (57, 58, 0.0002, 0.0026, 0.0434, 1.0),
    (57, 60, 0.0008, 0.0112, 0.1476, 1.0),
    (58, 59, 0.0006, 0.0092, 0.1130, 1.0),
    (58, 63, 0.0007, 0.0082, 0.1389, 1.0),
    (59, 60, 0.0004, 0.0046, 0.0780, 1.0),
    (60, 61, 0.0023, 0.0363, 0.3804, 1.0),
    (62, 63, 0.0004, 0.0043, 0.0729, 1.0),
    (62, 65, 0.0004, 0.0043, 0.0729, 1.0),
    (64, 63, 0.0016, 0.0435, 0.0, 1.06),
    (64, 65, 0.0016, 0.0435, 0.0, 1.06),
    (65, 66, 0.0009, 0.0101, 0.1723, 1.0),
    (66, 67, 0.0018, 0.0217, 0.3660, 1.0),
    (67, 68, 0.0009, 0.0094, 0.1710, 1.0),
    (68, 37, 0.0007, 0.0089, 0.1342, 1.0),
    (68, 19, 0.0016, 0.0195, 0.3040, 1.0),
    (68, 21, 0.0008, 0.0135, 0.2548, 1.0),
    (68, 24, 0.0003, 0.0059, 0.0680, 1.0),
    (37, 52, 0.0007, 0.0082, 0.1319, 1.0),
    (37, 27, 0.0013, 0.0173, 0.3216, 1.0),
    (19, 20, 0.0007, 0.0138, 0.0, 1.06),
    (21, 22, 0.0008, 0.0140, 0.2565, 1.0),
    (22, 23, 0.0006, 0.0096, 0.1846, 1.0),
    (23, 24, 0.0022, 0.0350, 0.3610, 1.0),
    (25, 26, 0.0032, 0.0323, 0.5310, 1.0),
    (26, 27, 0.0014, 0.0147, 0.2396, 1.0),
    (26, 28, 0.0043, 0.0474, 0.7802, 1.0),
    (26, 29, 0.0057, 0.0625, 1.0290, 1.0),
    (28, 29, 0.0014, 0.0151, 0.2490, 1.0),
    # NYPS network and inter-area ties
    (30, 53, 0.0008, 0.0074, 0.4800, 1.0),
    (30, 61, 0.0019, 0.0183, 0.2900, 1.0),
    (30, 31, 0.0013, 0.0187, 0.3330, 1.0),
    (30, 32, 0.0024, 0.0288, 0.4880, 1.0),
    (31, 53, 0.0016, 0.0163, 0.2500, 1.0),
    (31, 38, 0.0011, 0.0147, 0.2470, 1.0),
    (32, 33, 0.0008, 0.0099, 0.1680, 1.0),
    (33, 34, 0.0011, 0.0157, 0.2020, 1.0),
    (33, 38, 0.0036, 0.0444, 0.6930, 1.0),
    (34, 35, 0.0001, 0.0074, 0.0000, 0.946),
    (34, 36, 0.0033, 0.0111, 1.4500, 1.0),
    (35, 45, 0.0007, 0.0175, 1.3900, 1.0),
    (36, 17, 0.0005, 0.0045, 0.3200, 1.0),
    (27, 53, 0.0320, 0.3200, 0.4100, 1.0),
    (38, 46, 0.0022, 0.0284, 0.4300, 1.0),
    (39, 44, 0.0000, 0.0411, 0.0000, 1.0),
    (39, 45, 0.0000, 0.0839, 0.0000, 1.0),
    (40, 41, 0.0060, 0.0840, 3.1500, 1.0),
    (40, 48, 0.0020, 0.0220, 1.2800, 1.0),
    (41, 42, 0.0040, 0.0600, 2.2500, 1.0),
    (42, 18, 0.0040, 0.0600, 2.2500, 1.0),
    (43, 17, 0.0005, 0.0276, 0.0000, 1.0),
    (43, 44, 0.0001, 0.0011, 0.0000, 1.0),
    (44, 45, 0.0025, 0.0730, 0.0000, 1.0),
    (45, 51, 0.0004, 0.0105, 0.7200, 1.0),
    (46, 49, 0.0018, 0.0274, 0.2700, 1.0),
    (47, 48, 0.0025, 0.0268, 0.4000, 1.0),
    (47, 53, 0.0013, 0.0188, 1.3100, 1.0),
    (49, 18, 0.0076, 0.1141, 1.1600, 1.0),
    (50, 18, 0.0012, 0.0288, 2.0600, 1.0),
    (50, 51, 0.0009, 0.0221, 1.6200, 1.0),
]

IEEE68_LOADS = {
    17: (6000.0, 300.0),
    18: (2470.0, 123.0),
    20: (680.0, 103.0),
    21: (274.0, 115.0),
    23: (248.0, 85.0),
    24: (309.0, -92.0),
    25: (224.0, 47.0),
    26: (139.0, 17.0),
    27: (281.0, 76.0),
    28: (206.0, 28.0),
    29: (284.0, 27.0),
    33: (112.0, 0.0),
    36: (102.0, -19.5),
    39: (267.0, 12.6),
    40: (65.6, 23.5),
    41: (1000.0, 250.0),
    42: (1150.0, 250.0),
    45: (208.0, 21.0),
    46: (150.0, 28.5),
    47: (203.1, 32.6),
    48: (241.2, 2.2),
    49: (164.0, 29.0),
    50: (100.0, -147.0),
    51: (337.0, -122.0),
    52: (158.0, 30.0),
    55: (322.0, 2.4),
    56: (500.0, 184.0),
    59: (234.0, 84.0),
    60: (522.0, 177.0),
    61: (104.0, 125.0),
    64: (9.0, 88.0),
    67: (320.0, 153.0),
    68: (329.0, 32.0),
}

IEEE68_GENS = [
    (1, 250.0, 1.045, 42.0, 0.0310),
    (2, 545.0, 0.980, 30.2, 0.0697),
    (3, 650.0, 0.983, 35.8, 0.0531),
    (4, 632.0, 0.997, 28.6, 0.0436),
    (5, 505.0, 1.011, 26.0, 0.1320),
    (6, 700.0, 1.050, 34.8, 0.0500),
    (7, 560.0, 1.063, 26.4, 0.0490),
    (8, 540.0, 1.030, 24.3, 0.0570),
    (9, 800.0, 1.025, 34.5, 0.0570),
    (10, 500.0, 1.010, 31.0, 0.0457),
    (11, 1000.0, 1.000, 28.2, 0.0180),
    (12, 1350.0, 1.0156, 92.3, 0.0310),
    (13, 3591.0, 1.011, 248.0, 0.0055),
    (14, 1785.0, 1.000, 300.0, 0.00285),
    (15, 1000.0, 1.000, 300.0, 0.00285),
    (16, 4000.0, 1.000, 225.0, 0.00355),
]


def ieee68():
    bus_ids = list(range(1, 69))
    build_case("ieee68", 60.0, bus_ids, IEEE68_LOADS, IEEE68_ROWS, IEEE68_GENS, 15,
                note=BASE_NOTE)
    # Variant: machine 11 replaced by a grid-following inverter.  The GFL has no
    # inertial response; it is represented as a fixed injection (negative load)
    # so the operating point is unchanged.
    build_case("ieee68_gfl", 60.0, bus_ids, IEEE68_LOADS, IEEE68_ROWS, IEEE68_GENS, 15,
               note=BASE_NOTE + "; machine 11 replaced by a zero-inertia grid-following injection",
               drop_machines=(10,))


def pathological3():
    """Tiny stressed case: the operating point puts machine 1 more than 90 deg
    away from bus 2, so nodal inertia at bus 2 is undefined (negative weight
    sum) and no finite device inertia can restore it.  Used by tests."""
    buses = [
        {"id": 1, "name": "Bus 1", "voltage_mag": 1.0, "voltage_ang_deg": 62.0,
         "p_load": 0.0, "q_load": 0.0},
        {"id": 2, "name": "Bus 2", "voltage_mag": 1.0, "voltage_ang_deg": -75.0,
         "p_load": 1.0, "q_load": 0.0},
        {"id": 3, "name": "Bus 3", "voltage_mag": 1.0, "voltage_ang_deg": -58.0,
         "p_load": 0.0, "q_load": 0.0},
    ]
    branches = [
        {"from": 1, "to": 2, "reactance": 0.2, "status": True},
        {"from": 2, "to": 3, "reactance": 0.2, "status": True},
    ]
    machines = [
        {"id": 1, "bus": 1, "inertia_h": 100.0, "damping_d": 0.0, "xd_prime": 0.1,
         "p_gen": 0.6, "q_gen": 0.1},
        {"id": 2, "bus": 3, "inertia_h": 1000.0, "damping_d": 0.0, "xd_prime": 0.1,
         "p_gen": 0.4, "q_gen": 0.1},
    ]
    emit("stressed3", 60.0, buses, branches, machines, [],
         note="deliberately extreme operating point; not a power-flow solution")


if __name__ == "__main__":
    wscc9()
    ieee39()
    ieee68()
    pathological3()
