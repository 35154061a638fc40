#!/usr/bin/env python3
"""Regenerates data/bundle from the parameters below.

Node constants are rounded approximations of published device
characterization, fab efficiency and defect-density disclosures. Grid
intensity and utilization histories are synthetic series shaped to match the
published averages; provenance.toml marks each file accordingly.

    python3 data/generate_bundle.py [out_dir]
"""

import datetime as dt
import math
import sys
from pathlib import Path

import numpy as np

VERSION = "1.0.0"
SEED = 20240611

# name: mass production year, EPA anchor year, EPA at anchor (kWh/cm2),
# MPA (kg/cm2), total GPA (kg CO2e/cm2), yearly cumulative efficiency
# multipliers from mass production, capacity shares, quarterly D0 series.
def decay(v0, vinf, tau_years, n):
    return [vinf + (v0 - vinf) * math.exp(-0.25 * i / tau_years) for i in range(n)]

NODES = {
    "28nm": dict(mp=2011, anchor=2020, epa=0.75, mpa=0.5, gpa=0.20,
                 eff=[1.0, 1.6, 2.1, 2.6, 2.8, 2.9, 2.95, 3.0],
                 cap={"TW": 0.70, "KR": 0.15, "US": 0.15},
                 d0_start=(2011, 1), d0=decay(0.40, 0.07, 1.0, 48)),
    "16nm": dict(mp=2015, anchor=2020, epa=1.10, mpa=0.5, gpa=0.23,
                 eff=[1.0, 1.5, 1.9, 2.2, 2.35, 2.4],
                 cap={"TW": 0.85, "US": 0.15},
                 d0_start=(2015, 1), d0=decay(0.40, 0.08, 0.8, 36)),
    "14nm": dict(mp=2015, anchor=2020, epa=1.10, mpa=0.5, gpa=0.24,
                 eff=[1.0, 1.5, 1.9, 2.2, 2.3],
                 cap={"US": 0.50, "KR": 0.50},
                 d0_start=(2015, 1), d0=decay(0.13, 0.09, 1.0, 32)),
    "10nm": dict(mp=2016, anchor=2020, epa=1.36, mpa=0.5, gpa=0.28,
                 eff=[1.0, 1.5, 1.9, 2.1, 2.2],
                 cap={"KR": 0.31, "TW": 0.69},
                 d0_start=(2016, 10), d0=[1.10, 1.07, 1.034, 0.95] + decay(0.70, 0.08, 0.35, 20)),
    "7nm": dict(mp=2018, anchor=2022, epa=1.90, mpa=0.5, gpa=0.31,
                eff=[1.0, 1.6, 2.2, 2.7, 2.9],
                cap={"TW": 0.90, "KR": 0.10},
                d0_start=(2018, 1), d0=decay(0.60, 0.09, 0.7, 20)),
}

# gas, GWP (100-year), share of node GPA, 95% relative error
GASES = [
    ("CF4", 6630.0, 0.30, 0.5),
    ("C2F6", 11100.0, 0.20, 0.5),
    ("NF3", 16100.0, 0.35, 0.6),
    ("SF6", 23500.0, 0.10, 3.0),
    ("N2O", 265.0, 0.05, 0.7),
]
ABATEMENT = 0.95

# region: mean g/kWh, seasonal amplitude, daily noise sd
CI = {
    "KR": (450.0, 25.0, 30.0),
    "TW": (560.0, 20.0, 25.0),
    "US": (390.0, 20.0, 25.0),
    "RENEW": (25.0, 8.0, 8.0),
}

# name: beta(a, b), sample count
UTILIZATION = {
    "gpu_datacenter": (4.0, 5.0, 2000),
    "cpu_cloud": (6.0, 31.5, 2000),
    "mobile": (2.0, 6.0, 2000),
    "mobile_heavy": (4.0, 6.0, 2000),
}


def quarters(start, n):
    y, m = start
    out = []
    for _ in range(n):
        out.append(dt.date(y, m, 1))
        m += 3
        if m > 12:
            m -= 12
            y += 1
    return out


def write(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write(header + "\n")
        for r in rows:
            f.write(",".join(str(v) for v in r) + "\n")


def main(out):
    rng = np.random.default_rng(SEED)
    out.mkdir(parents=True, exist_ok=True)

    write(out / "nodes.csv", "name,epa_base_kwh_cm2,epa_anchor_year,mass_production_year,mpa_kgco2_cm2",
          [(n, p["epa"], p["anchor"], p["mp"], p["mpa"]) for n, p in NODES.items()])
    write(out / "efficiency.csv", "node,year,multiplier",
          [(n, p["mp"] + i, m) for n, p in NODES.items() for i, m in enumerate(p["eff"])])
    write(out / "defects.csv", "node,date,d0_per_cm2",
          [(n, d.isoformat(), round(v, 4))
           for n, p in NODES.items()
           for d, v in zip(quarters(p["d0_start"], len(p["d0"])), p["d0"])])
    write(out / "gases.csv", "node,gas,gwp,kg_per_cm2,rel_error_95,abatement",
          [(n, g, gwp, f"{p['gpa'] * share / gwp:.6e}", rel, ABATEMENT)
           for n, p in NODES.items() for g, gwp, share, rel in GASES])
    write(out / "capacity.csv", "node,region,share",
          [(n, r, s) for n, p in NODES.items() for r, s in p["cap"].items()])

    start = dt.date(2021, 1, 1)
    days = (dt.date(2023, 12, 31) - start).days + 1
    for region, (mean, amp, sd) in CI.items():
        t = np.arange(days)
        v = mean + amp * np.sin(2 * np.pi * t / 365.25) + rng.normal(0.0, sd, days)
        v = np.clip(v, 1.0, None)
        write(out / "ci" / f"{region}.csv", "timestamp,g_per_kwh",
              [(f"{start + dt.timedelta(days=int(i))}T00:00:00", f"{x:.1f}") for i, x in enumerate(v)])

    for name, (a, b, n) in UTILIZATION.items():
        write(out / "utilization" / f"{name}.csv", "value",
              [(f"{x:.4f}",) for x in rng.beta(a, b, n)])

    synthetic = "synthetic series shaped to published averages; not measured data"
    approx = "rounded approximation of public disclosures; interpolated, not transcribed"
    files = {
        "nodes.csv": f"device carbon characterization reports (EPA, MPA); {approx}",
        "efficiency.csv": f"foundry process energy-efficiency disclosures (28nm: 2.6x after 3 years); {approx}",
        "defects.csv": f"foundry defect-density disclosures (10nm: 6% drop in the first half year); {approx}",
        "gases.csv": f"imec per-node gas inventories with IPCC 2006/2019 Tier 2 95% errors, GWP100 AR5; {approx}",
        "capacity.csv": f"global production capacity breakdown by node (10nm: KR 31%, TW 69%); {approx}",
    }
    for region in CI:
        files[f"ci/{region}.csv"] = f"daily grid carbon intensity {region} 2021-2023; {synthetic}"
    for name in UTILIZATION:
        files[f"utilization/{name}.csv"] = f"device utilization samples ({name}); {synthetic}"
    with (out / "provenance.toml").open("w") as f:
        f.write(f'version = "{VERSION}"\n\n[files]\n')
        for k, v in files.items():
            f.write(f'"{k}" = "{v}"\n')


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "bundle")
