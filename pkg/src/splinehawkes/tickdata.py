"""Transaction-record ingestion and the market-movement filter.

Raw transaction prices bounce between quote levels even when the market
is not moving, so consecutive trades alternate in sign at the minimum
price increment.  The movement filter first drops trades without a price
change, then keeps a trade only when its price change continues the
direction of the previous change or is larger than one tick, which
removes the bounce while retaining genuine moves.  Timestamps recorded at
one-second resolution are de-rounded with uniform jitter on [-0.5, 0.5].

The CSV schema here (timestamp,price,volume,contract) is a neutral
interchange format; vendor feeds are adapted by building ``TickRecord``
lists directly and, if a file is wanted, writing them back out with
:func:`write_ticks_csv`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DomainError, ObservationWindow

__all__ = [
    "TickRecord",
    "SessionConfig",
    "read_ticks_csv",
    "write_ticks_csv",
    "select_active_contract",
    "filter_movements",
    "jitter_timestamps",
]


@dataclass(frozen=True)
class TickRecord:
    """One transaction: integer second within the session, price, volume, contract."""

    timestamp: int
    price: int
    volume: int
    contract_id: str

    def __post_init__(self):
        if self.price <= 0:
            raise DomainError(f"price must be positive, got {self.price}")
        if self.volume <= 0:
            raise DomainError(f"volume must be positive, got {self.volume}")


@dataclass(frozen=True)
class SessionConfig:
    """Session window in seconds-from-open, price grid, and jitter seed."""

    window: ObservationWindow
    tick_size: int = 5
    jitter_seed: int = 0

    def __post_init__(self):
        if self.tick_size <= 0:
            raise DomainError("tick size must be positive")


_COLUMNS = ("timestamp", "price", "volume", "contract")


def read_ticks_csv(path) -> list[TickRecord]:
    """Read transaction records; timestamps must be nondecreasing per contract.

    Expected header: timestamp,price,volume,contract.  Errors carry the
    offending line number.
    """
    records: list[TickRecord] = []
    last_ts: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return records  # empty file, no transactions
        if tuple(h.strip() for h in header) != _COLUMNS:
            raise DomainError(f"{path}:1: expected header {','.join(_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise DomainError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                ts, price, volume = int(row[0]), int(row[1]), int(row[2])
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from exc
            contract = row[3].strip()
            if not contract:
                raise DomainError(f"{path}:{lineno}: empty contract id")
            if contract in last_ts and ts < last_ts[contract]:
                raise DomainError(
                    f"{path}:{lineno}: timestamps decrease within contract {contract}"
                )
            last_ts[contract] = ts
            try:
                records.append(TickRecord(ts, price, volume, contract))
            except DomainError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_ticks_csv(records, path) -> None:
    lines = [",".join(_COLUMNS)]
    lines.extend(
        f"{r.timestamp},{r.price},{r.volume},{r.contract_id}" for r in records
    )
    Path(path).write_text("\n".join(lines) + "\n")


def select_active_contract(records, window: ObservationWindow) -> str:
    """Contract with the largest traded volume inside the session window.

    Ties break toward the lexicographically smaller contract id.
    """
    volumes: dict[str, int] = {}
    for r in records:
        if window.start <= r.timestamp <= window.end:
            volumes[r.contract_id] = volumes.get(r.contract_id, 0) + r.volume
    if not volumes:
        raise DomainError("no transactions inside the session window")
    best = max(volumes.items(), key=lambda item: (item[1], _reversed_key(item[0])))
    return best[0]


def _reversed_key(contract: str):
    # max() picks the larger key on volume ties; invert the id ordering so
    # the lexicographically smaller contract wins.
    return tuple(-ord(c) for c in contract)


def filter_movements(records, cfg: SessionConfig, sign_reference: str = "filtered") -> np.ndarray:
    """Timestamps of the price movements of one contract, in seconds.

    Two passes over chronologically ordered records of a single contract:

    1. drop every record whose price equals the previous record's price;
    2. keep a remaining record when the sign of its price change matches
       the sign of the previous price change, or when the magnitude of the
       change exceeds one tick.

    With ``sign_reference="filtered"`` (default) the sign comparison uses
    the previous surviving record of pass 1; with ``"raw"`` it uses the
    immediately preceding raw transaction, whose change may be zero, in
    which case only the magnitude rule can keep the record.  The very
    first price change of a session has no predecessor and qualifies only
    through the magnitude rule.
    """
    if sign_reference not in ("filtered", "raw"):
        raise DomainError(f"unknown sign reference {sign_reference!r}")
    recs = list(records)
    contracts = {r.contract_id for r in recs}
    if len(contracts) > 1:
        raise DomainError("movement filter expects records of a single contract")

    kept_times: list[float] = []
    prev_sign = 0  # sign of the previous price change under the chosen reference
    prev_price = None
    prev_raw_delta = 0
    for r in recs:
        if prev_price is None:
            prev_price = r.price
            continue
        delta = r.price - prev_price
        if delta == 0:
            prev_raw_delta = 0
            continue
        sign = 1 if delta > 0 else -1
        reference = prev_sign if sign_reference == "filtered" else np.sign(prev_raw_delta)
        if sign == reference or abs(delta) > cfg.tick_size:
            kept_times.append(float(r.timestamp))
        prev_sign = sign
        prev_raw_delta = delta
        prev_price = r.price
    return np.asarray(kept_times)


def jitter_timestamps(times, seed) -> np.ndarray:
    """De-round integer-second timestamps with uniform noise on [-0.5, 0.5].

    The result is sorted; the draw is reproducible per seed and the count
    never changes.
    """
    t = np.asarray(times, dtype=float)
    rng = np.random.default_rng(seed)
    return np.sort(t + rng.uniform(-0.5, 0.5, size=t.size))
