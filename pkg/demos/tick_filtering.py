"""Extract market movements from a noisy transaction tape.

Transaction prices in a liquid market bounce between quote levels even
when nothing is happening, so raw price changes overstate activity.  A
synthetic tape is built from a random-walk "true" price plus bid-ask
bounce; the movement filter drops the bounce (changes that reverse the
previous change and stay within one tick) and keeps directional or large
moves.  The retained events feed straight into the fitting pipeline.

Run from the repository root:  python3 demos/tick_filtering.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from splinehawkes import (
    ObservationWindow,
    SessionConfig,
    TickRecord,
    filter_movements,
    jitter_timestamps,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(404)
TICK = 5

# true price follows a lazy random walk; trades alternate around it
true_price = 30000
records = []
side = 1
for second in range(600):
    if rng.uniform() < 0.08:
        true_price += TICK * int(rng.choice([-2, -1, 1, 2], p=[0.1, 0.4, 0.4, 0.1]))
    side = -side if rng.uniform() < 0.8 else side
    traded = true_price + (TICK // 2 + TICK // 2) * (side > 0)  # bounce between two levels
    records.append(TickRecord(second, traded, int(rng.integers(1, 10)), "DEMO"))

cfg = SessionConfig(window=ObservationWindow(0.0, 600.0), tick_size=TICK, jitter_seed=1)
moves = filter_movements(records, cfg)
events = jitter_timestamps(moves, cfg.jitter_seed)
changes = sum(records[i].price != records[i - 1].price for i in range(1, len(records)))
print(f"{len(records)} transactions, {changes} price changes, "
      f"{moves.size} retained as movements ({100 * moves.size / len(records):.1f}%)")

fig, ax = plt.subplots(figsize=(11, 4.5))
ts = [r.timestamp for r in records]
ps = [r.price for r in records]
ax.step(ts, ps, where="post", lw=0.7, color="0.6", label="transaction price")
kept = set(moves.astype(int).tolist())
ax.plot([t for t in ts if t in kept], [p for t, p in zip(ts, ps) if t in kept],
        "rv", ms=6, label="retained movement")
ax.set_xlabel("time [s]")
ax.set_ylabel("price")
ax.set_title("bid-ask bounce removed, directional moves kept")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "tick_filtering.png", dpi=120)
print(f"wrote {OUT / 'tick_filtering.png'}")
