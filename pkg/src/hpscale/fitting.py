"""Power-law fitting from grid-search optima.

The learning-rate law lr = c * N**alpha * D**beta and the batch-size law
bs = d * D**gamma are fitted by ordinary least squares on the log-linear
forms

    log lr = log c + alpha * log N + beta * log D
    log bs = log d + gamma * log D

(natural logarithms; N is deliberately excluded from the batch-size law).
bootstrap_fit resamples whole observations with replacement, refits both
laws per resample, averages the per-resample (log c, alpha, beta, log d,
gamma), and reports empirical 2.5/97.5 percentile confidence bands.

All solves go through a QR decomposition rather than the normal
equations. Observations are canonically sorted before fitting so results
are bit-identical under input reordering.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentError,
    BootstrapFailureError,
    DegenerateDesignError,
    ParseError,
    SingularityError,
)

_MAX_REDRAWS = 10
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class OptimumObservation:
    """Empirically optimal (lr, bs) for one (N, D) training budget.

    opt_bs_tokens is nominally a token count; fractional values are
    accepted so that exactly law-consistent synthetic data round-trips
    through the fitter without quantization error.
    """

    n_params: float
    d_tokens: float
    opt_lr: float
    opt_bs_tokens: float

    def __post_init__(self):
        for name in ("n_params", "d_tokens", "opt_lr", "opt_bs_tokens"):
            v = getattr(self, name)
            if not (v > 0) or not math.isfinite(v):
                raise ArgumentError(f"{name} must be finite and positive, got {v}")


@dataclass(frozen=True)
class OlsSolution:
    """Least-squares solution with the usual goodness-of-fit numbers."""

    coefficients: tuple[float, ...]
    residuals: tuple[float, ...]
    rss: float
    standard_errors: tuple[float, ...]
    r_squared: float
    adjusted_r_squared: float
    n_obs: int
    n_coeffs: int

    @property
    def df_resid(self) -> int:
        return self.n_obs - self.n_coeffs


@dataclass(frozen=True)
class LrLawFit:
    log_c: float
    alpha: float
    beta: float

    @property
    def c(self) -> float:
        return math.exp(self.log_c)


@dataclass(frozen=True)
class BsLawFit:
    log_d: float
    gamma: float

    @property
    def d(self) -> float:
        return math.exp(self.log_d)


@dataclass(frozen=True)
class FitResult:
    """Bootstrap-averaged law coefficients with percentile confidence bands.

    ci maps each coefficient name (c, alpha, beta, d, gamma) to its
    (lower, upper) 95% band; samples holds the raw per-resample values of
    (log_c, alpha, beta, log_d, gamma) for downstream diagnostics.
    """

    c: float
    alpha: float
    beta: float
    d: float
    gamma: float
    ci: dict[str, tuple[float, float]]
    resamples: int
    seed: int
    samples: dict[str, np.ndarray]

    def to_json_dict(self) -> dict:
        return {
            "c": self.c,
            "alpha": self.alpha,
            "beta": self.beta,
            "d": self.d,
            "gamma": self.gamma,
            "ci": {k: [lo, hi] for k, (lo, hi) in self.ci.items()},
            "resamples": self.resamples,
            "seed": self.seed,
        }


# --- core OLS ---------------------------------------------------------------


def ols(design, response) -> OlsSolution:
    """Least squares of response on a design matrix with intercept column.

    Solves via QR, requires more rows than columns and full column rank.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if x.ndim != 2:
        raise ArgumentError("design must be a 2-D matrix")
    n, p = x.shape
    if y.shape != (n,):
        raise ArgumentError(f"response must have shape ({n},), got {y.shape}")
    if n <= p:
        raise ArgumentError(f"need more observations than coefficients ({n} <= {p})")

    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    if diag.min() <= _RANK_TOL * max(diag.max(), 1.0):
        raise SingularityError("design matrix is rank deficient")
    coeffs = np.linalg.solve(r, q.T @ y)
    resid = y - x @ coeffs
    rss = float(resid @ resid)

    df = n - p
    sigma2 = rss / df
    r_inv = np.linalg.solve(r, np.eye(p))
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))

    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / df if df > 0 else float("nan")
    return OlsSolution(
        coefficients=tuple(coeffs),
        residuals=tuple(resid),
        rss=rss,
        standard_errors=tuple(se),
        r_squared=r2,
        adjusted_r_squared=adj,
        n_obs=n,
        n_coeffs=p,
    )


# --- law fits ---------------------------------------------------------------


def _sorted_obs(obs) -> list[OptimumObservation]:
    items = list(obs)
    if not items:
        raise ArgumentError("no observations given")
    items.sort(key=lambda o: (o.n_params, o.d_tokens, o.opt_lr, o.opt_bs_tokens))
    return items


def _log_columns(items):
    log_n = np.array([math.log(o.n_params) for o in items])
    log_d = np.array([math.log(o.d_tokens) for o in items])
    log_lr = np.array([math.log(o.opt_lr) for o in items])
    log_bs = np.array([math.log(o.opt_bs_tokens) for o in items])
    return log_n, log_d, log_lr, log_bs


def _check_lr_span(items) -> None:
    if len(items) < 4:
        raise DegenerateDesignError(
            f"learning-rate law needs >= 4 observations, got {len(items)}"
        )
    if len({o.n_params for o in items}) < 2 or len({o.d_tokens for o in items}) < 2:
        raise DegenerateDesignError(
            "learning-rate law needs >= 2 distinct N and >= 2 distinct D"
        )


def fit_lr_law(obs) -> LrLawFit:
    """Point estimate of (log c, alpha, beta) from observed optima."""
    items = _sorted_obs(obs)
    _check_lr_span(items)
    log_n, log_d, log_lr, _ = _log_columns(items)
    design = np.column_stack([np.ones(len(items)), log_n, log_d])
    sol = ols(design, log_lr)
    return LrLawFit(*sol.coefficients)


def fit_bs_law(obs) -> BsLawFit:
    """Point estimate of (log d, gamma) from observed optima.

    Two observations with distinct D give the exact line through both
    points; more observations are fitted by least squares.
    """
    items = _sorted_obs(obs)
    if len({o.d_tokens for o in items}) < 2:
        raise DegenerateDesignError("batch-size law needs >= 2 distinct D")
    _, log_d, _, log_bs = _log_columns(items)
    if len(items) == 2:
        gamma = (log_bs[1] - log_bs[0]) / (log_d[1] - log_d[0])
        return BsLawFit(log_d=float(log_bs[0] - gamma * log_d[0]), gamma=float(gamma))
    design = np.column_stack([np.ones(len(items)), log_d])
    sol = ols(design, log_bs)
    return BsLawFit(*sol.coefficients)


# --- bootstrap ---------------------------------------------------------------


def _batched_fits(log_n, log_d, log_lr, log_bs, index_matrix):
    """Solve both laws for every resample at once via stacked QR.

    Returns (params, bad) where params is (resamples, 5) holding
    (log_c, alpha, beta, log_d, gamma) and bad flags rank-deficient
    learning-rate designs.
    """
    rn = log_n[index_matrix]  # (resamples, n)
    rd = log_d[index_matrix]
    ones = np.ones_like(rn)
    x3 = np.stack([ones, rn, rd], axis=-1)  # (resamples, n, 3)
    q3, r3 = np.linalg.qr(x3)
    diag3 = np.abs(np.diagonal(r3, axis1=-2, axis2=-1))
    bad = diag3.min(axis=-1) <= _RANK_TOL * np.maximum(diag3.max(axis=-1), 1.0)

    params = np.full((index_matrix.shape[0], 5), np.nan)
    good = ~bad
    if good.any():
        rhs3 = np.einsum("bij,bj->bi", q3[good].transpose(0, 2, 1), log_lr[index_matrix[good]])
        beta3 = np.linalg.solve(r3[good], rhs3[..., None])[..., 0]
        x2 = np.stack([ones[good], rd[good]], axis=-1)
        q2, r2 = np.linalg.qr(x2)
        rhs2 = np.einsum("bij,bj->bi", q2.transpose(0, 2, 1), log_bs[index_matrix[good]])
        beta2 = np.linalg.solve(r2, rhs2[..., None])[..., 0]
        params[good, :3] = beta3
        params[good, 3:] = beta2
    return params, bad


def bootstrap_fit(obs, resamples: int = 1000, seed: int = 0) -> FitResult:
    """Bootstrap both laws over `resamples` draws with replacement.

    Each resample derives its random stream from (seed, resample index),
    so serial and parallel execution agree bit for bit. Degenerate
    resamples (design rank below 3, which covers the all-same-N and
    all-same-D cases) are redrawn from their own stream, up to 10 retries,
    keeping the resample count intact.
    """
    if resamples < 1:
        raise ArgumentError(f"resamples must be >= 1, got {resamples}")
    items = _sorted_obs(obs)
    _check_lr_span(items)
    log_n, log_d, log_lr, log_bs = _log_columns(items)
    n = len(items)

    rngs = [
        np.random.default_rng(child)
        for child in np.random.SeedSequence(seed).spawn(resamples)
    ]
    idx = np.empty((resamples, n), dtype=np.intp)
    for i, rng in enumerate(rngs):
        idx[i] = np.sort(rng.integers(0, n, n))

    params = np.full((resamples, 5), np.nan)
    pending = np.arange(resamples)
    for attempt in range(_MAX_REDRAWS + 1):
        got, bad = _batched_fits(log_n, log_d, log_lr, log_bs, idx[pending])
        params[pending[~bad]] = got[~bad]
        pending = pending[bad]
        if pending.size == 0:
            break
        if attempt == _MAX_REDRAWS:
            raise BootstrapFailureError(
                f"{pending.size} resamples stayed degenerate after "
                f"{_MAX_REDRAWS} redraws (first index {int(pending[0])})"
            )
        for i in pending:
            idx[i] = np.sort(rngs[i].integers(0, n, n))

    means = params.mean(axis=0)
    lo, hi = np.percentile(params, [2.5, 97.5], axis=0)
    names = ("log_c", "alpha", "beta", "log_d", "gamma")
    ci = {}
    for k, name in enumerate(names):
        if name in ("log_c", "log_d"):
            ci[name.removeprefix("log_")] = (math.exp(lo[k]), math.exp(hi[k]))
        else:
            ci[name] = (float(lo[k]), float(hi[k]))
    return FitResult(
        c=math.exp(means[0]),
        alpha=float(means[1]),
        beta=float(means[2]),
        d=math.exp(means[3]),
        gamma=float(means[4]),
        ci=ci,
        resamples=resamples,
        seed=seed,
        samples={name: params[:, k].copy() for k, name in enumerate(names)},
    )


# --- observation CSV ----------------------------------------------------------

_OBS_HEADER = ["n_params", "d_tokens", "opt_lr", "opt_bs_tokens"]


def load_observations(source) -> list[OptimumObservation]:
    """Parse observations from CSV text, bytes, or a readable stream."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    rows = [(i, [c.strip() for c in row]) for i, row in enumerate(reader, start=1)]
    rows = [
        (i, row)
        for i, row in rows
        if row and any(row) and not row[0].startswith("#")
    ]
    if not rows:
        raise ParseError("empty observations file")
    first_line, header = rows[0]
    if header != _OBS_HEADER:
        raise ParseError(
            f"bad header {header}; expected {_OBS_HEADER}", line=first_line
        )
    out = []
    for lineno, row in rows[1:]:
        if len(row) != 4:
            raise ParseError(f"expected 4 columns, found {len(row)}", line=lineno)
        try:
            values = [float(c) for c in row]
        except ValueError as exc:
            raise ParseError(f"non-numeric value: {exc}", line=lineno) from exc
        try:
            out.append(OptimumObservation(*values))
        except ArgumentError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    if not out:
        raise ParseError("no observation rows found")
    return out


def load_observations_file(path: str | os.PathLike) -> list[OptimumObservation]:
    with open(path, "rb") as fh:
        return load_observations(fh)


def observations_to_csv(obs) -> str:
    lines = [",".join(_OBS_HEADER)]
    for o in obs:
        lines.append(
            f"{o.n_params!r},{o.d_tokens!r},{o.opt_lr!r},{o.opt_bs_tokens!r}"
        )
    return "\n".join(lines) + "\n"
