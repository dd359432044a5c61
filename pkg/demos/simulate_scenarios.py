"""Simulate self-exciting event streams over time-varying backgrounds.

Two stylized intraday backgrounds drive the demonstrations throughout
this package: a U-shaped rate (busy open and close, quiet lunch) and a
news-shock rate (flat, then a sudden jump that relaxes away).  This
script draws one realization of each, checks the basic bookkeeping, and
saves a figure of counting paths against the expected cumulative rate.

Run from the repository root:  python3 demos/simulate_scenarios.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from splinehawkes import (
    ExponentialKernel,
    ObservationWindow,
    branching_ratio,
    scenario_news_shock,
    scenario_ushape,
    simulate,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

window = ObservationWindow(0.0, 22200.0)  # a 6h10m session in seconds
kernel = ExponentialKernel(alphas=[0.5], betas=[1.0])
print(f"kernel branching ratio: {branching_ratio(kernel):.2f} "
      "(half of all events are triggered by earlier events)")

scenarios = {
    "U-shape": scenario_ushape(window, floor_rate=0.0193, edge_ratio=5.0),
    "news shock": scenario_news_shock(window, t_news=7770.0, base_rate=0.04, jump_factor=10.0),
}

fig, axes = plt.subplots(2, 2, figsize=(11, 7), sharex=True)
for col, (name, rate) in enumerate(scenarios.items()):
    seq = simulate(window, rate, kernel, seed=2026)
    expected = rate.integral(0.0, 22200.0) / (1.0 - branching_ratio(kernel))
    print(f"{name}: {seq.n} events simulated (expected about {expected:.0f})")

    grid = np.linspace(0.0, 22200.0, 800)
    axes[0, col].plot(grid, rate(grid), "k-")
    axes[0, col].set_title(f"{name} background rate")
    axes[0, col].set_ylabel("rate [1/s]")

    # counting path vs expected cumulative intensity of the cluster process
    cum = np.asarray([rate.integral(0.0, t) for t in grid]) / (1.0 - branching_ratio(kernel))
    axes[1, col].step(seq.times, np.arange(1, seq.n + 1), where="post", label="simulated")
    axes[1, col].plot(grid, cum, "r--", label="expected mean")
    axes[1, col].set_xlabel("time [s]")
    axes[1, col].set_ylabel("event count")
    axes[1, col].legend()

fig.tight_layout()
fig.savefig(OUT / "scenarios.png", dpi=120)
print(f"wrote {OUT / 'scenarios.png'}")
