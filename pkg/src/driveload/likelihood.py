"""State-conditional observation densities learned by Gaussian KDE.

One density per (channel, workload state) pair, estimated from the labeled
samples of training journeys and discretised onto a uniform grid for O(1)
lookup. Evaluation outside the grid clamps to the nearest edge, and a small
density floor keeps every likelihood strictly positive so the filter can
never zero out a state.

The joint likelihood of the channels observed at one instant is the product
of the per-channel densities (channels treated as conditionally independent
given the workload state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, InvariantViolation, ParseError
from .journey import ChannelSample, Journey
from .labeling import HIGH, LOW, LabelWindow, expand_labels, label_prompts

# tolerance on the trapezoidal integral of a fitted table, before flooring
INTEGRAL_TOL = 1e-3

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KdeConfig:
    """Fitting knobs for one density table.

    bandwidth None selects Silverman's rule
    h = 0.9 * min(sigma, IQR / 1.34) * n^(-1/5); a positive value fixes h.
    """

    bandwidth: float | None = None
    grid_points: int = 512
    grid_margin: float = 4.0
    density_floor: float = 1e-9

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise InvariantViolation("fixed bandwidth must be > 0")
        if self.grid_points < 2:
            raise InvariantViolation("grid_points must be >= 2")
        if self.grid_margin < 0:
            raise InvariantViolation("grid_margin must be >= 0")
        if not 0.0 < self.density_floor < 1.0:
            raise InvariantViolation("density_floor must lie in (0, 1)")


@dataclass(frozen=True)
class LikelihoodTable:
    """A discretised density for one channel under one workload state."""

    channel_id: str
    state: str
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def __eq__(self, other):
        if not isinstance(other, LikelihoodTable):
            return NotImplemented
        return (
            self.channel_id == other.channel_id
            and self.state == other.state
            and self.bandwidth == other.bandwidth
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.density, other.density)
        )


def silverman_bandwidth(values) -> float:
    """h = 0.9 * min(sigma, IQR / 1.34) * n^(-1/5), sample sigma (ddof=1).

    Falls back to sigma alone when the IQR degenerates to zero; a fully
    constant input has no data-driven bandwidth and is rejected.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2:
        raise InsufficientDataError("Silverman bandwidth needs at least 2 values")
    sigma = float(v.std(ddof=1))
    q75, q25 = np.percentile(v, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(sigma, iqr / 1.34) if iqr > 0.0 else sigma
    if spread <= 0.0:
        raise InsufficientDataError(
            "constant input: Silverman bandwidth undefined, use a fixed bandwidth"
        )
    return 0.9 * spread * n ** (-0.2)


def fit_kde(values, cfg: KdeConfig | None = None, *, channel_id="", state="") -> LikelihoodTable:
    """Fit one Gaussian-kernel density table.

    The grid spans the data range extended by grid_margin bandwidths on each
    side. The trapezoidal integral of the raw density must come out within
    INTEGRAL_TOL of one (a too-small margin loses kernel tail mass and is
    rejected); flooring is applied afterwards.
    """
    where = f" for ({channel_id}, {state})" if channel_id else ""
    cfg = cfg or KdeConfig()
    v = np.sort(np.asarray(values, dtype=float))
    if v.size < 2:
        raise InsufficientDataError(f"need at least 2 values to fit a density{where}")
    if not np.isfinite(v).all():
        raise InvariantViolation(f"non-finite training value{where}")
    if cfg.bandwidth is not None:
        h = cfg.bandwidth
    else:
        try:
            h = silverman_bandwidth(v)
        except InsufficientDataError as e:
            raise InsufficientDataError(f"{e}{where}") from None
    lo = float(v[0]) - cfg.grid_margin * h
    hi = float(v[-1]) + cfg.grid_margin * h
    if not lo < hi:
        raise InvariantViolation(f"degenerate grid{where}")
    grid = np.linspace(lo, hi, cfg.grid_points)
    density = np.zeros(cfg.grid_points)
    # block over the training values to bound the (grid x n) temporary
    block = max(1, int(4_000_000 / cfg.grid_points))
    for a in range(0, v.size, block):
        z = (grid[:, None] - v[None, a : a + block]) / h
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density /= v.size * h * _SQRT_2PI
    integral = float(np.trapezoid(density, grid))
    if abs(integral - 1.0) > INTEGRAL_TOL:
        raise InvariantViolation(
            f"density integral {integral:.6f} outside 1 +/- {INTEGRAL_TOL}{where}; "
            "widen grid_margin"
        )
    density = np.maximum(density, cfg.density_floor)
    return LikelihoodTable(channel_id, state, grid, density, float(h))


def eval_table(table: LikelihoodTable, value: float) -> float:
    """Linear interpolation on the grid, clamped to the edge densities."""
    return float(np.interp(value, table.grid, table.density))


def eval_likelihood(tables, obs, state: str) -> float:
    """Product of per-channel densities for the channels present at one
    instant. Multiplies in observation order."""
    if not obs:
        raise InvariantViolation("empty observation set")
    out = 1.0
    for s in obs:
        table = tables.get((s.channel_id, state))
        if table is None:
            raise InvariantViolation(f"no {state} table for channel {s.channel_id}")
        out *= eval_table(table, s.value)
    return out


def train_likelihoods(
    journeys,
    window: LabelWindow | None = None,
    cfg: KdeConfig | None = None,
    exclude=(),
) -> dict[tuple[str, str], LikelihoodTable]:
    """Fit one table per (channel, state) from prompt-labeled samples.

    Journeys named in `exclude` are skipped entirely (leave-one-out
    evaluation). Raises when any (channel, state) pair has too little data,
    naming the pair.
    """
    window = window or LabelWindow()
    exclude = set(exclude)
    pool: dict[tuple[str, str], list[float]] = {}
    channels: list[str] = []
    for j in journeys:
        if j.journey_id in exclude:
            continue
        for cid in j.channel_ids():
            if cid not in channels:
                channels.append(cid)
        labels = label_prompts(j)
        for sample, lab in expand_labels(j, labels, window):
            pool.setdefault((sample.channel_id, lab), []).append(sample.value)
    if not channels:
        raise InsufficientDataError("no training journeys")
    tables: dict[tuple[str, str], LikelihoodTable] = {}
    for cid in channels:
        for state in (LOW, HIGH):
            vals = pool.get((cid, state), [])
            if len(vals) < 2:
                raise InsufficientDataError(
                    f"not enough labeled samples for ({cid}, {state}): {len(vals)}"
                )
            tables[(cid, state)] = fit_kde(vals, cfg, channel_id=cid, state=state)
    return tables


# ---------------------------------------------------------------------------
# table file I/O: header line `T <channel> <state> <bandwidth> <n_grid>`
# followed by n_grid `<x> <density>` lines


def write_table(table: LikelihoodTable, path, provenance: str | None = None) -> None:
    lines = []
    if provenance:
        lines.append(f"# {provenance}")
    lines.append(
        f"T {table.channel_id} {table.state} {repr(float(table.bandwidth))} {table.grid.size}"
    )
    for x, d in zip(table.grid, table.density):
        lines.append(f"{repr(float(x))} {repr(float(d))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path) -> LikelihoodTable:
    path = Path(path)
    header = None
    xs: list[float] = []
    ds: list[float] = []
    expected = None
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if header is None:
                if parts[0] != "T" or len(parts) != 5:
                    raise ParseError(path, line_no, "expected: T <channel> <state> <h> <n>")
                try:
                    bw = float(parts[3])
                    expected = int(parts[4])
                except ValueError:
                    raise ParseError(path, line_no, "bad table header numbers") from None
                header = (parts[1], parts[2], bw)
            else:
                if len(parts) != 2:
                    raise ParseError(path, line_no, "expected: <x> <density>")
                try:
                    xs.append(float(parts[0]))
                    ds.append(float(parts[1]))
                except ValueError:
                    raise ParseError(path, line_no, "bad table point") from None
    if header is None:
        raise ParseError(path, 0, "missing T header")
    if expected != len(xs):
        raise ParseError(path, 0, f"expected {expected} grid points, found {len(xs)}")
    grid = np.asarray(xs)
    density = np.asarray(ds)
    if grid.size < 2 or not (np.diff(grid) > 0).all():
        raise InvariantViolation(f"{path}: table grid must strictly increase")
    if not (density > 0).all():
        raise InvariantViolation(f"{path}: table densities must be strictly positive")
    return LikelihoodTable(header[0], header[1], grid, density, header[2])


def table_filename(channel_id: str, state: str) -> str:
    return f"{channel_id}.{state}.lik"


def write_tables(tables, out_dir, provenance: str | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (cid, state), table in sorted(tables.items()):
        p = out_dir / table_filename(cid, state)
        write_table(table, p, provenance)
        written.append(p)
    return written


def read_tables(table_dir) -> dict[tuple[str, str], LikelihoodTable]:
    table_dir = Path(table_dir)
    tables = {}
    for p in sorted(table_dir.glob("*.lik")):
        t = read_table(p)
        tables[(t.channel_id, t.state)] = t
    if not tables:
        raise InsufficientDataError(f"no *.lik tables found in {table_dir}")
    return tables
