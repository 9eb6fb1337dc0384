"""Deterministic generators for synthetic surfaces and observations.

These serve as brute-force ground truth for the analytics and fitting
modules: generate_surface builds a convex (quadratic in log coordinates)
loss bowl with optional multiplicative lognormal noise, and
generate_observations emits law-consistent optima over an (N, D) lattice.

Noise streams are derived from (seed, point index), so two grids share
per-point noise wherever their indices align and generation may be
parallelized without changing the output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .fitting import OptimumObservation
from .laws import GridSpec, ModelScale
from .surface import LossSurface, SweepPoint


@dataclass(frozen=True)
class SurfaceSpec:
    """Quadratic-in-log loss bowl around (opt_lr, opt_bs).

    loss(lr, bs) = (base_loss + q(dx, dy)) * exp(noise_sigma * z) with
    dx = log lr - log opt_lr, dy = log bs - log opt_bs and
    q = curvature_lr * dx**2 + curvature_bs * dy**2 + 2 * cross_term * dx * dy.
    cross_term**2 <= curvature_lr * curvature_bs keeps q positive
    semi-definite; val_offset, when set, adds a constant-shift validation
    loss column.
    """

    opt_lr: float
    opt_bs: float
    curvature_lr: float = 1.0
    curvature_bs: float = 1.0
    cross_term: float = 0.0
    base_loss: float = 2.0
    noise_sigma: float = 0.0
    seed: int = 0
    val_offset: float | None = None
    scale: ModelScale = ModelScale(1.0e9, 1.0e11)

    def __post_init__(self):
        if not (self.opt_lr > 0) or not (self.opt_bs > 0):
            raise ArgumentError("opt_lr and opt_bs must be positive")
        if self.curvature_lr < 0 or self.curvature_bs < 0:
            raise ArgumentError("curvatures must be >= 0")
        if self.cross_term**2 > self.curvature_lr * self.curvature_bs:
            raise ArgumentError(
                f"cross_term {self.cross_term} breaks positive semi-definiteness "
                f"(needs cross**2 <= {self.curvature_lr * self.curvature_bs})"
            )
        if not (self.base_loss > 0):
            raise ArgumentError("base_loss must be positive")
        if self.noise_sigma < 0:
            raise ArgumentError("noise_sigma must be >= 0")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SurfaceSpec":
        doc = dict(doc)
        scale = ModelScale(
            n_params=float(doc.pop("n_params", 1.0e9)),
            d_tokens=float(doc.pop("d_tokens", 1.0e11)),
        )
        try:
            return cls(scale=scale, **doc)
        except TypeError as exc:
            raise ArgumentError(f"bad surface spec: {exc}") from exc


@dataclass(frozen=True)
class ObservationSpec:
    """Law-consistent optima over the (n_values x d_values) lattice.

    opt_lr = c * N**alpha * D**beta * exp(sigma * z1) and
    opt_bs = d_coef * D**gamma * exp(sigma * z2); snap maps both onto the
    default sweep grid.
    """

    c: float = 1.79
    alpha: float = -0.713
    beta: float = 0.307
    d_coef: float = 0.58
    gamma: float = 0.571
    n_values: tuple[float, ...] = ()
    d_values: tuple[float, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    snap: bool = False

    def __post_init__(self):
        if self.c <= 0 or self.d_coef <= 0:
            raise ArgumentError("law coefficients c and d_coef must be positive")
        if len(set(self.n_values)) < 2 or len(set(self.d_values)) < 2:
            raise ArgumentError("lattice needs >= 2 distinct N and >= 2 distinct D")
        if any(v <= 0 for v in self.n_values) or any(v <= 0 for v in self.d_values):
            raise ArgumentError("lattice values must be positive")
        if self.noise_sigma < 0:
            raise ArgumentError("noise_sigma must be >= 0")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ObservationSpec":
        doc = dict(doc)
        for key in ("n_values", "d_values"):
            if key in doc:
                doc[key] = tuple(float(v) for v in doc[key])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ArgumentError(f"bad observation spec: {exc}") from exc


def load_spec_file(path) -> SurfaceSpec | ObservationSpec:
    """Read a spec JSON; the "kind" key selects surface vs observations."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ArgumentError("spec must be a JSON object")
    kind = doc.pop("kind", None)
    if kind == "surface":
        return SurfaceSpec.from_json_dict(doc)
    if kind == "observations":
        return ObservationSpec.from_json_dict(doc)
    raise ArgumentError('spec JSON needs "kind": "surface" or "observations"')


def _point_normal(seed: int, stream: int, i: int, j: int) -> float:
    rng = np.random.default_rng(np.random.SeedSequence((seed, stream, i, j)))
    return float(rng.standard_normal())


def generate_surface(spec: SurfaceSpec, grid: GridSpec | None = None) -> LossSurface:
    """Evaluate the quadratic bowl at every grid node.

    Batch-size nodes are rounded to integers (token counts); with
    noise_sigma = 0 and the optimum on-grid the surface argmin is exactly
    the planted node.
    """
    grid = grid if grid is not None else GridSpec.default()
    log_opt_lr = math.log(spec.opt_lr)
    log_opt_bs = math.log(spec.opt_bs)
    points = []
    for i, lr in enumerate(grid.lr_values):
        for j, bs in enumerate(grid.bs_values):
            bs_tokens = int(round(bs))
            dx = math.log(lr) - log_opt_lr
            dy = math.log(bs_tokens) - log_opt_bs
            q = (
                spec.curvature_lr * dx * dx
                + spec.curvature_bs * dy * dy
                + 2.0 * spec.cross_term * dx * dy
            )
            loss = spec.base_loss + q
            if spec.noise_sigma > 0:
                loss *= math.exp(spec.noise_sigma * _point_normal(spec.seed, 0, i, j))
            val = None if spec.val_offset is None else loss + spec.val_offset
            points.append(SweepPoint(lr, bs_tokens, loss, val))
    return LossSurface(
        scale=spec.scale,
        points=tuple(points),
        arch_tag="synthetic",
        recipe_tag="synthetic",
    )


def generate_observations(spec: ObservationSpec) -> list[OptimumObservation]:
    """Emit one observation per lattice point, optionally grid-snapped."""
    from .laws import Prediction, snap_to_grid  # cycle-free local import

    grid = GridSpec.default()
    out = []
    for i, n in enumerate(spec.n_values):
        for j, d in enumerate(spec.d_values):
            log_lr = (
                math.log(spec.c) + spec.alpha * math.log(n) + spec.beta * math.log(d)
            )
            log_bs = math.log(spec.d_coef) + spec.gamma * math.log(d)
            if spec.noise_sigma > 0:
                log_lr += spec.noise_sigma * _point_normal(spec.seed, 1, i, j)
                log_bs += spec.noise_sigma * _point_normal(spec.seed, 2, i, j)
            opt_lr, opt_bs = math.exp(log_lr), math.exp(log_bs)
            if spec.snap:
                snapped = snap_to_grid(
                    Prediction(lr=opt_lr, bs_tokens=opt_bs, method="synthetic"), grid
                )
                opt_lr, opt_bs = snapped.lr, snapped.bs_tokens
            out.append(OptimumObservation(n, d, opt_lr, opt_bs))
    return out
