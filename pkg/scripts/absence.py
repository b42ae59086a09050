"""Backward elimination on the school-absence data over a range of seeds."""

import argparse
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from bbglm import dataset as ds
from bbglm.elimination import ABSENCE_FINAL, absence_spec, backward_eliminate
from bbglm.reports import trace_report, write_report


@dataclass
class Config:
    seeds: int = 20
    draws_per_step: int = 1000
    threshold: float = 2.0
    out: Path = Path("results/absence")


def main(cfg: Config) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    data = ds.load_bundled("absence")
    paths = Counter()
    matches = 0
    for seed in range(cfg.seeds):
        trace = backward_eliminate(data, absence_spec(), "poisson", cfg.threshold,
                                   cfg.draws_per_step, seed)
        write_report(trace_report(trace, data.source), cfg.out / f"trace_seed{seed}.json")
        paths[" > ".join(trace.dropped)] += 1
        matches += set(trace.final_terms) == set(ABSENCE_FINAL)
        if seed == 0:
            print(trace.final_summary.format())
    print(f"\nfinal term set matches the 11-term reference in {matches}/{cfg.seeds} runs")
    for path, k in paths.most_common():
        print(f"{k:3d}  dropped {path}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=Config.seeds)
    p.add_argument("--draws-per-step", type=int, default=Config.draws_per_step)
    p.add_argument("--out", type=Path, default=Config.out)
    a = p.parse_args()
    main(Config(seeds=a.seeds, draws_per_step=a.draws_per_step, out=a.out))
