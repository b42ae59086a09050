"""Vaso-constriction logistic models: ML fits, BB posteriors, contrast and bands."""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bbglm import dataset as ds
from bbglm.design import ModelSpec
from bbglm.engine import fit_ml, functional_draws, prepare, run_posterior
from bbglm.reports import (
    fit_report,
    posterior_report,
    write_band_csv,
    write_density_csv,
    write_draws_csv,
    write_report,
)
from bbglm.summaries import band_table, central_interval, ecdf, kde, summarize


@dataclass
class Config:
    draws: int = 10_000
    seed: int = 2024
    grid_points: int = 100
    contrast_runs: int = 0  # > 0 repeats the contrast interval over that many seeds
    out: Path = Path("results/vaso")


def load():
    data = ds.load_bundled("vaso")
    return data.derive("lv", "log(volume)").derive("lr", "log(rate)").derive("lt", "lv + lr")


def main(cfg: Config) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    data = load()
    full = ModelSpec("response", ("lv", "lr"))
    common = ModelSpec("response", ("lt",))

    for tag, spec in (("full", full), ("common", common)):
        problem = prepare(data, spec, "binomial")
        fit = fit_ml(problem)
        write_report(fit_report(fit, problem.design.names, "binomial", spec, data.source),
                     cfg.out / f"ml_{tag}.json")
        coefs = ", ".join(f"{b:.3f} ({s:.3f})" for b, s in zip(fit.beta, fit.se))
        print(f"ML {tag}: {coefs}  deviance {fit.deviance:.3f}")

    draws_full = run_posterior(data, full, "binomial", cfg.draws, cfg.seed)
    contrast = functional_draws(draws_full, [0.0, 1.0, -1.0])
    lo, hi = central_interval(contrast)
    write_density_csv(ecdf(contrast), kde(contrast), cfg.out / "contrast_density.csv")
    print(f"beta_lv - beta_lr: 95% interval [{lo:.2f}, {hi:.2f}]")

    draws = run_posterior(data, common, "binomial", cfg.draws, cfg.seed)
    summary = summarize(draws)
    write_draws_csv(draws, cfg.out / "draws_common.csv")
    write_report(posterior_report(summary, draws, data.source), cfg.out / "posterior_common.json")
    print(summary.format())

    lt = data.column("lt")
    grid = {"lt": np.linspace(lt.min(), lt.max(), cfg.grid_points)}
    write_band_csv(band_table(draws, grid), cfg.out / "bands.csv")

    if cfg.contrast_runs:
        covered = 0
        for seed in range(cfg.contrast_runs):
            c = functional_draws(run_posterior(data, full, "binomial", cfg.draws, seed),
                                 [0.0, 1.0, -1.0])
            lo, hi = central_interval(c)
            covered += lo <= 0 <= hi
        print(f"contrast interval contains 0 in {covered}/{cfg.contrast_runs} runs")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--draws", type=int, default=Config.draws)
    p.add_argument("--seed", type=int, default=Config.seed)
    p.add_argument("--contrast-runs", type=int, default=Config.contrast_runs)
    p.add_argument("--out", type=Path, default=Config.out)
    a = p.parse_args()
    main(Config(draws=a.draws, seed=a.seed, contrast_runs=a.contrast_runs, out=a.out))
