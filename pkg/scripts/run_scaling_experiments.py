#!/usr/bin/env python3
"""Reproduce the scaling-law curves and the synthetic entropy curve.

Writes per-sweep CSV/JSON plot data under results/ plus one combined
series file; every output is deterministic.

    python scripts/run_scaling_experiments.py --out results
"""

import argparse
import json
from pathlib import Path

import numpy as np

from embed_infolab import scaling_sim as ss
from embed_infolab.cli import emit_plot_data
from embed_infolab.entropy import EntropyParams, closed_form_subspace, fit_power_law


def skill_and_param_sweeps(out: Path) -> list[tuple[str, float, float]]:
    combined = []
    ns = np.unique(np.round(np.logspace(np.log10(4), np.log10(400), 25)).astype(int))
    for alpha in (0.3, 0.5, 1.0):
        world = ss.SkillWorld(m=10**6, alpha=alpha)
        gaps = [(int(n), ss.conditional_entropy_after(world, int(n)) - world.c) for n in ns]
        fit = ss.verify_skill_power_law(world, ns)
        (out / f"skills_alpha{alpha}.json").write_text(
            json.dumps({"alpha": alpha, "exponent": fit.exponent, "r_squared": fit.r_squared},
                       indent=1, sort_keys=True)
        )
        combined += [(f"skills a={alpha}", float(n), g) for n, g in gaps]
        print(f"skills alpha={alpha}: exponent {fit.exponent:+.4f} (expect {-alpha})")
    return combined


def flops_sweep(out: Path) -> list[tuple[str, float, float]]:
    world = ss.SkillWorld(m=10**6, alpha=0.5)
    ns = np.unique(np.round(np.logspace(1, 3, 25)).astype(int))
    pairs = ss.flops_sweep(world, ns.tolist())
    fit = fit_power_law([s for s, _ in pairs], [h - world.c for _, h in pairs])
    print(f"flops alpha=0.5: exponent {fit.exponent:+.4f} (expect -0.2)")
    (out / "flops.json").write_text(
        json.dumps({"exponent": fit.exponent, "r_squared": fit.r_squared}, indent=1, sort_keys=True)
    )
    return [("flops a=0.5", s, h - world.c) for s, h in pairs]


def dataset_sweep(out: Path) -> list[tuple[str, float, float]]:
    world = ss.SkillWorld(m=10**18, alpha=0.5, gamma_d=0.3)
    ds = np.logspace(np.log10(250.0), np.log10(250000.0), 25)
    pairs = ss.entropy_vs_dataset(world, ds.tolist())
    fit = fit_power_law([d for d, _ in pairs], [h - world.c for _, h in pairs])
    print(f"dataset gamma=0.3: exponent {fit.exponent:+.4f} (expect +0.4)")
    (out / "dataset.json").write_text(
        json.dumps({"exponent": fit.exponent, "r_squared": fit.r_squared}, indent=1, sort_keys=True)
    )
    return [("dataset g=0.3", d, h - world.c) for d, h in pairs]


def entropy_curve(out: Path) -> list[tuple[str, float, float]]:
    # normalized entropy against model size for a synthetic r/d power law
    params = EntropyParams(0.1)
    d = 4096
    rows = []
    for k in range(0, 7):
        r = max(d >> (2 * k), 1)
        size = d // r
        rows.append(("entropy r/d~size^-1", float(size), closed_form_subspace(r, d, params)))
    fit = fit_power_law([x for _, x, _ in rows], [y for _, _, y in rows])
    print(f"entropy curve: fitted exponent {fit.exponent:+.4f}")
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series = []
    series += skill_and_param_sweeps(out)
    series += flops_sweep(out)
    series += dataset_sweep(out)
    series += entropy_curve(out)
    emit_plot_data(series, out / "all_series.csv")
    print(f"wrote {out}/all_series.csv plus per-sweep JSON summaries")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
