"""Classical and Bayesian-bootstrap intervals for the income mean."""

import argparse
from dataclasses import dataclass
from pathlib import Path

from bbglm import dataset as ds
from bbglm.design import ModelSpec
from bbglm.engine import run_posterior
from bbglm.reports import mean_ci_report, posterior_report, write_density_csv, write_report
from bbglm.summaries import classical_intervals, ecdf, kde, summarize


@dataclass
class Config:
    draws: int = 10_000
    seed: int = 2024
    population_size: int = 648
    out: Path = Path("results/income")


def main(cfg: Config) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    data = ds.load_bundled("income")
    ci = classical_intervals(data.column("income"), cfg.population_size)
    write_report(mean_ci_report(ci, "income", data.source), cfg.out / "classical.json")

    draws = run_posterior(data, ModelSpec("income"), "gaussian", cfg.draws, cfg.seed)
    summary = summarize(draws)
    write_report(posterior_report(summary, draws, data.source), cfg.out / "posterior.json")
    mean_draws = draws.column("(Intercept)")
    write_density_csv(ecdf(mean_draws), kde(mean_draws), cfg.out / "posterior_density.csv")

    print(f"mean {ci.mean:.2f}  variance (divisor n) {ci.variance:.2f}")
    print(f"z interval   [{ci.z_interval[0]:.1f}, {ci.z_interval[1]:.1f}]")
    print(f"fpc interval [{ci.fpc_interval[0]:.1f}, {ci.fpc_interval[1]:.1f}]")
    print(f"BB interval  [{summary.lower[0]:.1f}, {summary.upper[0]:.1f}]"
          f"  (M = {draws.M_effective})")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--draws", type=int, default=Config.draws)
    p.add_argument("--seed", type=int, default=Config.seed)
    p.add_argument("--out", type=Path, default=Config.out)
    a = p.parse_args()
    main(Config(draws=a.draws, seed=a.seed, out=a.out))
