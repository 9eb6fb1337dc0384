"""Grid-search loss surfaces: ingestion and landscape analytics.

A LossSurface holds the final smoothed training loss (and optionally a
validation loss) for every (learning rate, batch size) point of one sweep.
Analytics cover global-optimum extraction, bilinear interpolation in
log-log coordinates, relative-error scoring of off-grid predictions,
plateau extraction, per-slice unimodality diagnostics, and train/val
argmin consistency.

Surfaces are immutable after construction; every operation here is a pure
function of its inputs.
"""

from __future__ import annotations

import bisect
import io
import math
import os
from dataclasses import dataclass, field

from .errors import ArgumentError, GridShapeError, OutOfHullError, ParseError
from .laws import ModelScale

METRICS = ("train", "val")

# Bilinear interpolation can round a hair below the node minimum when all
# cell corners are equal; treat anything this close to zero as zero.
_UNDERSHOOT_TOL = 1e-12


@dataclass(frozen=True)
class SweepPoint:
    """One grid-search sample: (lr, bs) and its end-of-training losses."""

    lr: float
    bs_tokens: int
    train_smooth_loss: float
    val_loss: float | None = None

    def __post_init__(self):
        if not (self.lr > 0) or not math.isfinite(self.lr):
            raise ArgumentError(f"lr must be finite and positive, got {self.lr}")
        if self.bs_tokens <= 0:
            raise ArgumentError(f"bs_tokens must be positive, got {self.bs_tokens}")
        if not math.isfinite(self.train_smooth_loss) or self.train_smooth_loss <= 0:
            raise ArgumentError(
                f"train_smooth_loss must be finite and positive, "
                f"got {self.train_smooth_loss}"
            )
        if self.val_loss is not None and (
            not math.isfinite(self.val_loss) or self.val_loss <= 0
        ):
            raise ArgumentError(
                f"val_loss must be finite and positive, got {self.val_loss}"
            )

    def loss(self, metric: str) -> float:
        if metric == "train":
            return self.train_smooth_loss
        if metric == "val":
            if self.val_loss is None:
                raise ArgumentError(
                    f"point (lr={self.lr}, bs={self.bs_tokens}) has no val_loss"
                )
            return self.val_loss
        raise ArgumentError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class LossSurface:
    """Immutable collection of SweepPoints for one (N, D) run family."""

    scale: ModelScale
    points: tuple[SweepPoint, ...]
    arch_tag: str = ""
    recipe_tag: str = ""

    def __post_init__(self):
        if not self.points:
            raise ArgumentError("surface must contain at least one point")
        seen = set()
        for pt in self.points:
            key = (pt.lr, pt.bs_tokens)
            if key in seen:
                raise ArgumentError(f"duplicate sweep point at lr={pt.lr}, bs={pt.bs_tokens}")
            seen.add(key)

    def lr_values(self) -> tuple[float, ...]:
        return tuple(sorted({pt.lr for pt in self.points}))

    def bs_values(self) -> tuple[int, ...]:
        return tuple(sorted({pt.bs_tokens for pt in self.points}))

    def has_full_val(self) -> bool:
        return all(pt.val_loss is not None for pt in self.points)

    def point_at(self, lr: float, bs_tokens: int) -> SweepPoint:
        for pt in self.points:
            if pt.lr == lr and pt.bs_tokens == bs_tokens:
                return pt
        raise ArgumentError(f"no sweep point at lr={lr}, bs={bs_tokens}")

    def grid_losses(self, metric: str) -> list[list[float]]:
        """Losses as a [lr index][bs index] table; requires a complete grid."""
        lrs, bss = self.lr_values(), self.bs_values()
        if len(self.points) != len(lrs) * len(bss):
            raise GridShapeError(
                f"surface has {len(self.points)} points but the lr x bs grid "
                f"needs {len(lrs)} x {len(bss)} = {len(lrs) * len(bss)}"
            )
        li = {v: i for i, v in enumerate(lrs)}
        bi = {v: j for j, v in enumerate(bss)}
        table: list[list[float | None]] = [[None] * len(bss) for _ in lrs]
        for pt in self.points:
            table[li[pt.lr]][bi[pt.bs_tokens]] = pt.loss(metric)
        # uniqueness + count guarantee every cell is filled
        return [[v for v in row] for row in table]  # type: ignore[misc]


@dataclass(frozen=True)
class OptimumReport:
    """Grid point with the lowest loss under the chosen metric."""

    hp: tuple[float, int]
    loss: float
    metric: str


@dataclass(frozen=True)
class PlateauRegion:
    """Points whose loss sits within a relative threshold of the minimum."""

    delta: float
    members: frozenset[tuple[float, int]]


@dataclass(frozen=True)
class ConvexityViolation:
    """Unimodality breach in one slice: axis is 'row' (fixed bs) or 'col'."""

    axis: str
    fixed_value: float
    index: int


@dataclass(frozen=True)
class ConvexityReport:
    row_unimodal_fraction: float
    col_unimodal_fraction: float
    tolerance: float
    violations: tuple[ConvexityViolation, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    train_opt: OptimumReport
    val_opt: OptimumReport


# --- CSV ingestion ----------------------------------------------------------

_REQUIRED_META = ("n_params", "d_tokens")
_HEADER_BASE = ["lr", "bs_tokens", "train_smooth_loss"]


def load_surface(source) -> LossSurface:
    """Parse a surface from CSV text, bytes, or a readable stream.

    Comment lines starting with '#' carry key=value metadata; n_params and
    d_tokens are required. The header is lr,bs_tokens,train_smooth_loss
    with an optional trailing val_loss column.
    """
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    meta: dict[str, str] = {}
    header: list[str] | None = None
    points: list[SweepPoint] = []
    seen: set[tuple[float, int]] = set()

    for lineno, raw in enumerate(io.StringIO(data), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            if cells[: len(_HEADER_BASE)] != _HEADER_BASE or len(cells) > 4 or (
                len(cells) == 4 and cells[3] != "val_loss"
            ):
                raise ParseError(
                    f"bad header {line!r}; expected "
                    "'lr,bs_tokens,train_smooth_loss[,val_loss]'",
                    line=lineno,
                )
            header = cells
            continue
        if len(cells) != len(header):
            raise ParseError(
                f"expected {len(header)} columns, found {len(cells)}", line=lineno
            )
        try:
            lr = float(cells[0])
            bs_raw = float(cells[1])
            train = float(cells[2])
            val = None
            if len(header) == 4 and cells[3] != "":
                val = float(cells[3])
        except ValueError as exc:
            raise ParseError(f"non-numeric value: {exc}", line=lineno) from exc
        if not math.isfinite(bs_raw) or bs_raw != round(bs_raw):
            raise ParseError(f"bs_tokens must be integral, got {cells[1]}", line=lineno)
        try:
            point = SweepPoint(lr, int(round(bs_raw)), train, val)
        except ArgumentError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        key = (point.lr, point.bs_tokens)
        if key in seen:
            raise ParseError(
                f"duplicate (lr, bs) pair ({point.lr}, {point.bs_tokens})",
                line=lineno,
            )
        seen.add(key)
        points.append(point)

    if header is None:
        raise ParseError("no header found (empty file?)")
    if not points:
        raise ParseError("no data rows found")
    missing = [k for k in _REQUIRED_META if k not in meta]
    if missing:
        raise ParseError(f"missing required metadata {missing}")
    try:
        scale = ModelScale(
            n_params=float(meta["n_params"]),
            d_tokens=float(meta["d_tokens"]),
            n_active=float(meta["n_active"]) if "n_active" in meta else None,
            flops_per_token=(
                float(meta["flops_per_token"]) if "flops_per_token" in meta else None
            ),
        )
    except (ValueError, ArgumentError) as exc:
        raise ParseError(f"bad metadata: {exc}") from exc
    return LossSurface(
        scale=scale,
        points=tuple(points),
        arch_tag=meta.get("arch_tag", ""),
        recipe_tag=meta.get("recipe_tag", ""),
    )


def load_surface_file(path: str | os.PathLike) -> LossSurface:
    with open(path, "rb") as fh:
        return load_surface(fh)


def surface_to_csv(surface: LossSurface) -> str:
    """Serialize a surface back to the CSV schema accepted by load_surface."""
    lines = [
        f"# n_params={surface.scale.n_params!r}",
        f"# d_tokens={surface.scale.d_tokens!r}",
    ]
    if surface.scale.n_active is not None:
        lines.append(f"# n_active={surface.scale.n_active!r}")
    if surface.scale.flops_per_token is not None:
        lines.append(f"# flops_per_token={surface.scale.flops_per_token!r}")
    if surface.arch_tag:
        lines.append(f"# arch_tag={surface.arch_tag}")
    if surface.recipe_tag:
        lines.append(f"# recipe_tag={surface.recipe_tag}")
    has_val = surface.has_full_val()
    lines.append(",".join(_HEADER_BASE + (["val_loss"] if has_val else [])))
    for pt in sorted(surface.points, key=lambda p: (p.lr, p.bs_tokens)):
        row = [repr(pt.lr), str(pt.bs_tokens), repr(pt.train_smooth_loss)]
        if has_val:
            row.append(repr(pt.val_loss))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# --- analytics --------------------------------------------------------------


def find_optimum(surface: LossSurface, metric: str = "train") -> OptimumReport:
    """Grid point with minimal loss; ties break to smaller lr, then bs."""
    _check_metric(surface, metric)
    best = min(surface.points, key=lambda pt: (pt.loss(metric), pt.lr, pt.bs_tokens))
    return OptimumReport(
        hp=(best.lr, best.bs_tokens), loss=best.loss(metric), metric=metric
    )


def _check_metric(surface: LossSurface, metric: str) -> None:
    if metric not in METRICS:
        raise ArgumentError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if metric == "val" and not surface.has_full_val():
        raise ArgumentError("metric 'val' requires val_loss on every point")


def interpolate_loss(
    surface: LossSurface, lr: float, bs_tokens: float, metric: str = "train"
) -> float:
    """Bilinear interpolation in (log lr, log bs); exact at grid nodes.

    Queries outside the grid hull raise OutOfHullError carrying the
    nearest grid corner; incomplete grids raise GridShapeError.
    """
    _check_metric(surface, metric)
    if not (lr > 0) or not (bs_tokens > 0):
        raise ArgumentError("query lr and bs must be positive")
    table = surface.grid_losses(metric)
    lrs, bss = surface.lr_values(), surface.bs_values()
    log_lrs = [math.log(v) for v in lrs]
    log_bss = [math.log(v) for v in bss]
    qx, qy = math.log(lr), math.log(bs_tokens)

    if not (log_lrs[0] <= qx <= log_lrs[-1]) or not (log_bss[0] <= qy <= log_bss[-1]):
        corner_lr = min(lrs, key=lambda v: abs(math.log(v) - qx))
        corner_bs = min(bss, key=lambda v: abs(math.log(v) - qy))
        raise OutOfHullError(
            f"query (lr={lr:.6e}, bs={bs_tokens:.6e}) lies outside the grid hull; "
            f"nearest corner is (lr={corner_lr:.6e}, bs={corner_bs:.6e})",
            nearest_corner=(corner_lr, float(corner_bs)),
        )

    i = _cell_index(log_lrs, qx)
    j = _cell_index(log_bss, qy)
    t = _cell_frac(log_lrs, i, qx)
    u = _cell_frac(log_bss, j, qy)
    i1 = i + 1 if len(lrs) > 1 else i
    j1 = j + 1 if len(bss) > 1 else j
    v00, v01 = table[i][j], table[i][j1]
    v10, v11 = table[i1][j], table[i1][j1]
    return (
        (1.0 - t) * (1.0 - u) * v00
        + t * (1.0 - u) * v10
        + (1.0 - t) * u * v01
        + t * u * v11
    )


def _cell_index(coords: list[float], q: float) -> int:
    if len(coords) == 1:
        return 0
    i = bisect.bisect_right(coords, q) - 1
    return max(0, min(i, len(coords) - 2))


def _cell_frac(coords: list[float], i: int, q: float) -> float:
    if len(coords) == 1:
        return 0.0
    return (q - coords[i]) / (coords[i + 1] - coords[i])


def relative_error(
    surface: LossSurface, hp: tuple[float, float], metric: str = "train"
) -> float:
    """(interpolated loss - optimum loss) / optimum loss; zero at the optimum."""
    opt = find_optimum(surface, metric)
    value = interpolate_loss(surface, hp[0], hp[1], metric)
    rel = (value - opt.loss) / opt.loss
    if -_UNDERSHOOT_TOL <= rel < 0.0:
        return 0.0
    return rel


def plateau(
    surface: LossSurface, delta: float = 0.0025, metric: str = "train"
) -> PlateauRegion:
    """Points with (loss - min) / min <= delta; delta defaults to 0.25%."""
    if not (delta >= 0):
        raise ArgumentError(f"delta must be >= 0, got {delta}")
    opt = find_optimum(surface, metric)
    members = frozenset(
        (pt.lr, pt.bs_tokens)
        for pt in surface.points
        if (pt.loss(metric) - opt.loss) / opt.loss <= delta
    )
    return PlateauRegion(delta=delta, members=members)


def convexity_report(
    surface: LossSurface, epsilon: float = 1e-3, metric: str = "train"
) -> ConvexityReport:
    """Fraction of unimodal fixed-bs rows and fixed-lr columns.

    A slice is unimodal when losses are non-increasing up to the minimum
    index and non-decreasing afterwards, with each comparison slackened by
    epsilon in absolute loss units.
    """
    if not (epsilon >= 0):
        raise ArgumentError(f"epsilon must be >= 0, got {epsilon}")
    table = surface.grid_losses(metric)
    lrs, bss = surface.lr_values(), surface.bs_values()
    violations: list[ConvexityViolation] = []

    row_ok = 0
    for j, bs in enumerate(bss):  # fixed bs, losses along lr
        bad = _unimodality_breaks([table[i][j] for i in range(len(lrs))], epsilon)
        if bad:
            violations.extend(
                ConvexityViolation("row", float(bs), k) for k in bad
            )
        else:
            row_ok += 1
    col_ok = 0
    for i, lr in enumerate(lrs):  # fixed lr, losses along bs
        bad = _unimodality_breaks(table[i], epsilon)
        if bad:
            violations.extend(ConvexityViolation("col", lr, k) for k in bad)
        else:
            col_ok += 1

    return ConvexityReport(
        row_unimodal_fraction=row_ok / len(bss),
        col_unimodal_fraction=col_ok / len(lrs),
        tolerance=epsilon,
        violations=tuple(violations),
    )


def _unimodality_breaks(values: list[float], epsilon: float) -> list[int]:
    m = values.index(min(values))
    breaks = []
    for k in range(len(values) - 1):
        if k < m:  # must be non-increasing before the minimum
            if values[k + 1] > values[k] + epsilon:
                breaks.append(k + 1)
        else:  # non-decreasing after it
            if values[k + 1] < values[k] - epsilon:
                breaks.append(k + 1)
    return breaks


def argmin_consistency(surface: LossSurface) -> ConsistencyReport:
    """Whether train and val losses share the same argmin grid point."""
    if not surface.has_full_val():
        raise ArgumentError("argmin_consistency requires val_loss on every point")
    train_opt = find_optimum(surface, "train")
    val_opt = find_optimum(surface, "val")
    return ConsistencyReport(
        consistent=train_opt.hp == val_opt.hp,
        train_opt=train_opt,
        val_opt=val_opt,
    )
