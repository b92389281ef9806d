"""Jump-process simulation and empirical-vs-spectral validation.

Paths are compound Poisson above a truncation radius eps, with the
compensation drift dictated by the order class: none below order one,
the unit-ball compensator at order one (identically zero there because
those measures are symmetric), and full compensation above order one.
Small jumps are discarded by default, with the lost variance reported
against the unit-ball second moment; an optional Brownian proxy with
matched covariance can stand in for them.

Radii are drawn by exact inversion of the piecewise-power tail, so the
law above eps carries no discretization error.  Every draw comes from a
counter-based stream keyed by (seed, purpose, replica): identical
arguments give bit-identical samples, and replicas never share counter
space, so ensembles parallelize as pure reductions.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .densities import DensityField
from .errors import ConfigError, NumericalError
from .measures import LevyMeasureSpec, PiecewisePowerCurve, tail_moment
from .rng import stream

__all__ = [
    "JumpSample",
    "PathSample",
    "compensated_sum",
    "empirical_density_check",
    "sample_from_density",
    "simulate_endpoints",
    "simulate_levy_path",
    "simulate_poisson_measure",
    "small_jump_report",
]

_COUNT_LIMIT = 1e8
_DEFICIT_WARN = 0.01


# ---------------------------------------------------------------------------
# measure-derived ingredients


def _ray_rates(spec: LevyMeasureSpec, eps: float) -> np.ndarray:
    return np.array([ray.tail(eps) for ray in spec.rays])


def _drift_vector(spec: LevyMeasureSpec, eps: float) -> np.ndarray:
    """Compensation drift per unit time for jumps above eps."""
    drift = np.zeros(spec.dim)
    if spec.order_sigma < 1.0:
        return drift
    hi = 1.0 if spec.order_sigma == 1.0 else math.inf
    for ray in spec.rays:
        if eps < hi:
            m1 = tail_moment(ray.tail, 1.0, eps, hi)
            drift -= m1 * np.asarray(ray.direction)
    return drift


def _proxy_covariance(spec: LevyMeasureSpec, eps: float) -> np.ndarray:
    cov = np.zeros((spec.dim, spec.dim))
    for ray in spec.rays:
        theta = np.asarray(ray.direction)
        cov += tail_moment(ray.tail, 2.0, 0.0, eps) * np.outer(theta, theta)
    return cov


def small_jump_report(spec: LevyMeasureSpec, eps: float) -> dict:
    """Variance discarded below eps, relative to the unit-ball second moment."""
    if not 0.0 < eps:
        raise ConfigError("truncation level eps must be positive")
    lost = sum(tail_moment(ray.tail, 2.0, 0.0, eps) for ray in spec.rays)
    reference = sum(tail_moment(ray.tail, 2.0, 0.0, 1.0) for ray in spec.rays)
    return {
        "eps": float(eps),
        "discarded_variance": float(lost),
        "unit_ball_variance": float(reference),
        "deficit_fraction": float(lost / reference) if reference > 0 else 0.0,
    }


def _tail_inverse_table(curve: PiecewisePowerCurve, eps: float):
    """Breakpoints for exact inversion of the tail on (eps, inf)."""
    radii = [eps] + [k for k in curve.knots if k > eps]
    values = [float(curve(r)) for r in radii]
    exps = [
        math.log(values[i + 1] / values[i]) / math.log(radii[i + 1] / radii[i])
        for i in range(len(radii) - 1)
    ]
    exps.append(curve.slope_right)
    return np.asarray(radii), np.asarray(values), np.asarray(exps)


def _invert_tail(table, targets: np.ndarray) -> np.ndarray:
    """Radii r with tail(r) = target, target in (0, tail(eps)]."""
    radii, values, exps = table
    # values decrease; locate the segment of each target
    idx = np.searchsorted(-values, -targets, side="right") - 1
    idx = np.clip(idx, 0, len(exps) - 1)
    return radii[idx] * (targets / values[idx]) ** (1.0 / exps[idx])


# ---------------------------------------------------------------------------
# sample containers


@dataclass(frozen=True)
class JumpSample:
    """Poisson point sample on [0, horizon] x marks with its intensity."""

    horizon: float
    times: np.ndarray = field(repr=False)
    marks: tuple
    intensity: tuple
    compensated: bool = True

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) != len(self.marks):
            raise ConfigError("one mark per jump time is required")
        if len(t) and (t[0] <= 0.0 or t[-1] > self.horizon or np.any(np.diff(t) <= 0)):
            raise ConfigError("jump times must be strictly increasing inside (0, horizon]")
        object.__setattr__(self, "times", t)

    @property
    def total_intensity(self) -> float:
        return float(sum(wgt for _, wgt in self.intensity))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "mark"])
            for t, z in zip(self.times, self.marks):
                writer.writerow([repr(float(t)), z])


@dataclass(frozen=True)
class PathSample:
    """Piecewise-constant path on a time grid plus its jump list."""

    horizon: float
    eps: float
    grid_times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    jump_times: np.ndarray = field(repr=False)
    jump_vectors: np.ndarray = field(repr=False)
    drift: np.ndarray
    variance_deficit: float
    proxy: bool = False

    def __post_init__(self):
        if np.any(np.diff(self.jump_times) < 0):
            raise ConfigError("jump times must be sorted")
        if self.values.shape != (len(self.grid_times), len(self.drift)):
            raise ConfigError("path values must be (time nodes, dim)")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time"] + [f"z{c + 1}" for c in range(self.values.shape[1])])
            for t, row in zip(self.grid_times, self.values):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# simulation


def _check_count(expected: float):
    if expected > _COUNT_LIMIT:
        raise NumericalError(
            f"expected jump count {expected:.3g} exceeds {_COUNT_LIMIT:.0e}; "
            "increase the truncation level eps"
        )


def _deficit(spec: LevyMeasureSpec, eps: float, proxy: bool) -> float:
    report = small_jump_report(spec, eps)
    if not proxy and report["deficit_fraction"] > _DEFICIT_WARN:
        warnings.warn(
            f"discarded small-jump variance is {report['deficit_fraction']:.2%} of the "
            "unit-ball second moment; consider a smaller eps or the Brownian proxy",
            RuntimeWarning,
        )
    return report["deficit_fraction"]


def _proxy_root(spec: LevyMeasureSpec, eps: float) -> np.ndarray:
    cov = _proxy_covariance(spec, eps)
    vals, vecs = np.linalg.eigh(cov)
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def simulate_levy_path(
    spec: LevyMeasureSpec,
    T: float,
    eps: float,
    rng_seed: int,
    n_nodes: int = 257,
    brownian_proxy: bool = False,
) -> PathSample:
    """One path of the jump process on a uniform time grid."""
    if not (T > 0 and np.isfinite(T)):
        raise ConfigError("horizon T must be positive and finite")
    rates = _ray_rates(spec, eps)
    total = float(rates.sum())
    _check_count(total * T)
    deficit = _deficit(spec, eps, brownian_proxy)
    rng = stream(rng_seed, "levy-path")

    counts = rng.poisson(rates * T)
    times, vectors = [], []
    for ray, count in zip(spec.rays, counts):
        if count == 0:
            continue
        table = _tail_inverse_table(ray.tail, eps)
        targets = ray.tail(eps) * (1.0 - rng.random(count))
        radii = _invert_tail(table, targets)
        times.append(rng.random(count) * T)
        vectors.append(radii[:, None] * np.asarray(ray.direction)[None, :])
    if times:
        jump_times = np.concatenate(times)
        jump_vectors = np.concatenate(vectors)
        order = np.argsort(jump_times, kind="stable")
        jump_times, jump_vectors = jump_times[order], jump_vectors[order]
    else:
        jump_times = np.zeros(0)
        jump_vectors = np.zeros((0, spec.dim))

    drift = _drift_vector(spec, eps)
    grid_times = np.linspace(0.0, T, n_nodes)
    positions = np.searchsorted(jump_times, grid_times, side="right")
    cumulative = np.vstack([np.zeros(spec.dim), np.cumsum(jump_vectors, axis=0)])
    values = cumulative[positions] + grid_times[:, None] * drift[None, :]
    if brownian_proxy:
        root = _proxy_root(spec, eps)
        dt = grid_times[1] - grid_times[0]
        increments = rng.standard_normal((n_nodes - 1, spec.dim)) @ root.T * math.sqrt(dt)
        values[1:] += np.cumsum(increments, axis=0)
    return PathSample(
        float(T), float(eps), grid_times, values, jump_times, jump_vectors,
        drift, deficit, brownian_proxy,
    )


def simulate_endpoints(
    spec: LevyMeasureSpec,
    t: float,
    eps: float,
    n_paths: int,
    rng_seed: int,
    brownian_proxy: bool = False,
) -> tuple[np.ndarray, dict]:
    """Terminal values of n independent paths, drawn ensemble-vectorized."""
    if not (t > 0 and np.isfinite(t)):
        raise ConfigError("time t must be positive and finite")
    if n_paths < 1:
        raise ConfigError("at least one path is required")
    rates = _ray_rates(spec, eps)
    total = float(rates.sum())
    _check_count(total * t)
    _check_count(total * t * n_paths / 2.0)
    deficit = _deficit(spec, eps, brownian_proxy)
    rng = stream(rng_seed, "levy-endpoints")

    out = np.zeros((n_paths, spec.dim))
    for ray, rate in zip(spec.rays, rates):
        counts = rng.poisson(rate * t, n_paths)
        m = int(counts.sum())
        if m == 0:
            continue
        table = _tail_inverse_table(ray.tail, eps)
        targets = ray.tail(eps) * (1.0 - rng.random(m))
        radii = _invert_tail(table, targets)
        owner = np.repeat(np.arange(n_paths), counts)
        sums = np.bincount(owner, weights=radii, minlength=n_paths)
        out += sums[:, None] * np.asarray(ray.direction)[None, :]
    drift = _drift_vector(spec, eps)
    out += t * drift[None, :]
    if brownian_proxy:
        root = _proxy_root(spec, eps)
        out += rng.standard_normal((n_paths, spec.dim)) @ root.T * math.sqrt(t)
    info = {
        "n_paths": int(n_paths),
        "mean_count_per_path": total * t,
        "drift": drift,
        "variance_deficit": deficit,
        "proxy": brownian_proxy,
    }
    return out, info


def simulate_poisson_measure(intensity, T: float, rng_seed: int) -> JumpSample:
    """Homogeneous Poisson point sample with i.i.d. marks."""
    if not (T > 0 and np.isfinite(T)):
        raise ConfigError("horizon T must be positive and finite")
    pairs = tuple(intensity.items()) if isinstance(intensity, dict) else tuple(intensity)
    if not pairs:
        raise ConfigError("the intensity must carry at least one mark")
    weights = np.array([float(w) for _, w in pairs])
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise ConfigError(
            "total intensity must be finite with positive mark weights; "
            "truncate to a finite mark set first"
        )
    total = float(weights.sum())
    _check_count(total * T)
    rng = stream(rng_seed, "poisson-measure")
    n = int(rng.poisson(total * T))
    times = np.sort(rng.random(n)) * T
    labels = rng.choice(len(pairs), size=n, p=weights / total)
    marks = tuple(pairs[i][0] for i in labels)
    return JumpSample(float(T), times, marks, pairs)


def compensated_sum(sample: JumpSample, h) -> float:
    """sum h(z_i) - horizon * integral of h against the intensity."""
    raw = sum(float(h(z)) for z in sample.marks)
    comp = sample.horizon * sum(float(h(z)) * w for z, w in sample.intensity)
    return raw - comp


# ---------------------------------------------------------------------------
# empirical law checks


def _spectral_cdf(field: DensityField):
    """Per-node cumulative mass of a one-dimensional density field."""
    grid = field.grid
    order = np.argsort(grid.space_axis())
    x = grid.space_axis()[order]
    mass = field.values[order] * grid.cell_volume
    cdf = np.clip(np.cumsum(mass), 0.0, 1.0)
    return x, cdf


def _radial_cdf(field: DensityField):
    radius = field.grid.space_radius.ravel()
    order = np.argsort(radius)
    mass = field.values.ravel()[order] * field.grid.cell_volume
    return radius[order], np.clip(np.cumsum(mass), 0.0, 1.0)


def empirical_density_check(samples: np.ndarray, field: DensityField) -> dict:
    """Kolmogorov-Smirnov distance between an ensemble and a density field."""
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n < 10_000:
        raise ConfigError("the empirical check needs at least 1e4 samples")
    if pts.shape[1] != field.grid.dim:
        raise ConfigError("sample dimension does not match the field")
    if field.grid.dim == 1:
        coords, cdf = _spectral_cdf(field)
        data = np.sort(pts[:, 0])
    else:
        coords, cdf = _radial_cdf(field)
        data = np.sort(np.linalg.norm(pts, axis=1))
    spec_at = np.interp(data, coords, cdf, left=0.0, right=1.0)
    ranks = np.arange(1, n + 1) / n
    sup = float(np.max(np.maximum(np.abs(spec_at - ranks), np.abs(spec_at - ranks + 1.0 / n))))
    band = 1.36 / math.sqrt(n) * 1.5
    return {
        "n": int(n),
        "sup_distance": sup,
        "band": band,
        "passed": bool(sup <= band),
        "sample_mean": [float(v) for v in pts.mean(axis=0)],
        "sample_std": [float(v) for v in pts.std(axis=0)],
    }


def sample_from_density(field: DensityField, n: int, rng_seed: int) -> np.ndarray:
    """Inverse-CDF draws from a one-dimensional density field."""
    if field.grid.dim != 1:
        raise ConfigError("direct density sampling is one-dimensional only")
    coords, cdf = _spectral_cdf(field)
    rng = stream(rng_seed, "density-sample")
    u = rng.random(int(n)) * cdf[-1]
    return np.interp(u, cdf, coords)
