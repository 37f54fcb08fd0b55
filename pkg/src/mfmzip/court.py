"""Half-court domain, block grid and binning of shot locations into counts."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

COURT_LENGTH = 47.0
COURT_WIDTH = 50.0
HISTOGRAM_KEYS = (0, 1, 2, 3, 4, 5, "6+")


class IngestError(ValueError):
    """Raised for malformed or out-of-domain shot records."""


@dataclass(frozen=True)
class ShotRecord:
    player_id: str
    x: float
    y: float
    made: Optional[bool] = None


@dataclass(frozen=True)
class CourtGrid:
    """Regular partition of [0, 47] x [0, 50] into 1 ft x 2 ft blocks.

    Block ``j`` corresponds to ``(row, col) = divmod(j, ny)`` where ``row``
    indexes the x axis and ``col`` the y axis.
    """

    block_len_x: float = 1.0
    block_len_y: float = 2.0
    length: float = COURT_LENGTH
    width: float = COURT_WIDTH

    @property
    def nx(self) -> int:
        return int(round(self.length / self.block_len_x))

    @property
    def ny(self) -> int:
        return int(round(self.width / self.block_len_y))

    @property
    def J(self) -> int:
        return self.nx * self.ny

    @property
    def block_area(self) -> float:
        return self.block_len_x * self.block_len_y

    def block_index(self, row, col):
        return np.asarray(row) * self.ny + np.asarray(col)

    def row_col(self, j):
        return np.divmod(np.asarray(j), self.ny)

    def centroids(self) -> tuple[np.ndarray, np.ndarray]:
        """Block-centre x and y coordinates, each of length J, in block order."""
        cx = (np.arange(self.nx) + 0.5) * self.block_len_x
        cy = (np.arange(self.ny) + 0.5) * self.block_len_y
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        return gx.ravel(), gy.ravel()

    def locate(self, x, y) -> np.ndarray:
        """Block index for each coordinate pair.

        Blocks are half-open except the last along each axis, which is
        closed so that x == 47 and y == 50 stay on the court.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        row = np.minimum(np.floor(x / self.block_len_x).astype(np.int64), self.nx - 1)
        col = np.minimum(np.floor(y / self.block_len_y).astype(np.int64), self.ny - 1)
        return self.block_index(row, col)

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x >= 0) & (x <= self.length) & (y >= 0) & (y <= self.width)


@dataclass
class CountMatrix:
    y: np.ndarray
    player_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.y.ndim != 2:
            raise ValueError("count matrix must be 2-D")
        if len(self.player_ids) != self.y.shape[0]:
            raise ValueError(
                f"{len(self.player_ids)} player ids for {self.y.shape[0]} rows"
            )
        if (self.y < 0).any():
            raise ValueError("counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def J(self) -> int:
        return self.y.shape[1]


def reflect_full_court(x, y, length: float = COURT_LENGTH, width: float = COURT_WIDTH):
    """Rotate back-court coordinates of a 94 ft court onto the offensive half."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    far = x > length
    return np.where(far, 2 * length - x, x), np.where(far, width - y, y)


def check_domain(records: Sequence[ShotRecord], grid: CourtGrid) -> None:
    for idx, rec in enumerate(records):
        if not (np.isfinite(rec.x) and np.isfinite(rec.y)) or not grid.contains(rec.x, rec.y):
            raise IngestError(
                f"record {idx} ({rec.player_id}) at ({rec.x}, {rec.y}) lies outside "
                f"[0, {grid.length}] x [0, {grid.width}]"
            )


def bin_shots(
    records: Sequence[ShotRecord],
    grid: CourtGrid = CourtGrid(),
    player_ids: Optional[Sequence[str]] = None,
) -> CountMatrix:
    """Count shot attempts per player per block.

    ``player_ids`` fixes the row order (and allows players with no
    records); otherwise rows follow first appearance in ``records``.
    """
    check_domain(records, grid)
    if player_ids is None:
        player_ids = list(dict.fromkeys(r.player_id for r in records))
    else:
        player_ids = list(player_ids)
        if len(set(player_ids)) != len(player_ids):
            raise IngestError("duplicate player ids")
    row_of = {p: i for i, p in enumerate(player_ids)}
    unknown = sorted({r.player_id for r in records} - row_of.keys())
    if unknown:
        raise IngestError(f"records for players not in the player list: {unknown[:5]}")

    y = np.zeros((len(player_ids), grid.J), dtype=np.int64)
    if records:
        rows = np.fromiter((row_of[r.player_id] for r in records), np.int64, len(records))
        xs = np.fromiter((r.x for r in records), float, len(records))
        ys = np.fromiter((r.y for r in records), float, len(records))
        np.add.at(y, (rows, grid.locate(xs, ys)), 1)
    return CountMatrix(y, player_ids)


def count_histogram(counts: CountMatrix, player: int) -> dict:
    """Number of blocks with 0, 1, ..., 5 and 6+ shots for one player."""
    if not 0 <= player < counts.n:
        raise IndexError(f"player index {player} out of range for {counts.n} players")
    row = counts.y[player]
    hist = {k: int(np.sum(row == k)) for k in range(6)}
    hist["6+"] = int(np.sum(row >= 6))
    return hist


def filter_players(
    records: Sequence[ShotRecord],
    min_attempts: int = 0,
    exclude: Iterable[str] = (),
) -> list[ShotRecord]:
    """Keep players with more than ``min_attempts`` records and not excluded."""
    exclude = set(exclude)
    totals: dict[str, int] = {}
    for r in records:
        totals[r.player_id] = totals.get(r.player_id, 0) + 1
    keep = {p for p, c in totals.items() if c > min_attempts and p not in exclude}
    return [r for r in records if r.player_id in keep]


def _parse_made(value: str) -> Optional[bool]:
    v = value.strip().lower()
    if v == "":
        return None
    if v in ("1", "true", "t", "yes", "made"):
        return True
    if v in ("0", "false", "f", "no", "missed"):
        return False
    raise IngestError(f"unrecognised 'made' value {value!r}")


def read_shots_csv(path, reflect: bool = False, grid: CourtGrid = CourtGrid()) -> list[ShotRecord]:
    """Read ``player_id,x,y[,made]`` records (header required)."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"player_id", "x", "y"} - set(reader.fieldnames or ())
        if missing:
            raise IngestError(f"{path}: missing columns {sorted(missing)}")
        has_made = "made" in reader.fieldnames
        for idx, row in enumerate(reader):
            try:
                x, y = float(row["x"]), float(row["y"])
            except (TypeError, ValueError) as exc:
                raise IngestError(f"{path}: record {idx} has a non-numeric coordinate") from exc
            if reflect:
                x, y = (float(v) for v in reflect_full_court(x, y, grid.length, grid.width))
            made = _parse_made(row["made"] or "") if has_made else None
            records.append(ShotRecord(row["player_id"], x, y, made))
    return records


def write_counts_csv(counts: CountMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["player_id"] + [str(j) for j in range(counts.J)])
        for pid, row in zip(counts.player_ids, counts.y):
            w.writerow([pid] + row.tolist())


def read_counts_csv(path) -> CountMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "player_id":
            raise IngestError(f"{path}: first column must be player_id")
        ids, rows = [], []
        for line in reader:
            ids.append(line[0])
            rows.append([int(v) for v in line[1:]])
    y = np.array(rows, dtype=np.int64).reshape(len(ids), len(header) - 1)
    return CountMatrix(y, ids)


def save_counts_npz(counts: CountMatrix, path) -> None:
    np.savez_compressed(path, y=counts.y, player_ids=np.array(counts.player_ids, dtype=str))


def load_counts_npz(path) -> CountMatrix:
    with np.load(path) as data:
        return CountMatrix(data["y"], [str(p) for p in data["player_ids"]])
