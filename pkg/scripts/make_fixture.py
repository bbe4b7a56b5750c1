#!/usr/bin/env python3
"""Regenerate the bundled synthetic dataset under src/greenfolio/data/fixture.

25 assets (15 large, 6 mid, 4 small) with year-end closes for 1999-2023, a
market index over the same years, disaster losses for 1990-2023 and
emissions intensity for 1999-2023. Asset returns load on the market excess
return, on losses and on intensity so the factor regression has something
to find. Seeded; rerunning reproduces the committed files.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

SEED = 1999
YEARS = range(1999, 2024)
RF = 0.0695
SECTORS = ("IT", "Banking", "FMCG", "Pharma", "Auto", "Power", "Cement", "Chemicals",
           "Telecom", "Metals", "Textiles", "Infra")

OUT = Path(__file__).resolve().parents[1] / "src" / "greenfolio" / "data" / "fixture"


def fmt(x: float) -> str:
    return format(x, ".10g")


def main(out: Path = OUT) -> None:
    rng = np.random.default_rng(SEED)
    out.mkdir(parents=True, exist_ok=True)
    years = list(YEARS)
    n = len(years)

    mret = np.clip(0.12 + 0.20 * rng.standard_normal(n - 1), -0.55, None)
    market = 1000.0 * np.concatenate([[1.0], np.cumprod(1.0 + mret)])

    loss_years = list(range(1990, 2024))
    losses = np.exp(np.log(3.0) + 0.9 * rng.standard_normal(len(loss_years)))
    loss_by_year = dict(zip(loss_years, losses))

    intensity = 0.40 - 0.0062 * np.arange(n) + 0.002 * rng.standard_normal(n)
    tf_by_year = dict(zip(years, intensity))

    caps = ["large"] * 15 + ["mid"] * 6 + ["small"] * 4
    rows = []
    for i, cap in enumerate(caps):
        ticker = f"{cap[0].upper()}{i + 1:02d}GRN"
        score = round(float(rng.uniform(40.0, 85.0)), 2)
        sector = SECTORS[i % len(SECTORS)]
        vol = {"large": 0.18, "mid": 0.25, "small": 0.32}[cap]
        alpha = rng.normal(-0.02, 0.015)
        beta = rng.uniform(0.6, 1.3)
        price = float(rng.uniform(50.0, 500.0))
        rows.append((ticker, f"Synthetic {cap} {i + 1:02d}", cap, score, years[0], price, sector))
        for t, year in enumerate(years[1:]):
            r = (RF + alpha + beta * (mret[t] - RF)
                 - 0.008 * (loss_by_year[year] - 3.0)
                 - 1.5 * (tf_by_year[year] - 0.33)
                 + vol * rng.standard_normal())
            price *= 1.0 + max(r, -0.8)
            rows.append((ticker, f"Synthetic {cap} {i + 1:02d}", cap, score, year, price, sector))

    with (out / "assets.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "name", "cap_class", "env_score", "year", "close", "sector"])
        for ticker, name, cap, score, year, price, sector in rows:
            w.writerow([ticker, name, cap, fmt(score), year, fmt(price), sector])
    for name, header, items in (
        ("market.csv", ("year", "index_level"), zip(years, market)),
        ("losses.csv", ("year", "damage_usd_bn"), loss_by_year.items()),
        ("intensity.csv", ("year", "tco2_per_kusd"), tf_by_year.items()),
    ):
        with (out / name).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for year, value in items:
                w.writerow([year, fmt(float(value))])
    print(f"wrote fixture to {out}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=OUT)
    main(p.parse_args().out)
