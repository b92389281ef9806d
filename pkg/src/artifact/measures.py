"""Levy measures with heavy radial tails, their rescalings and moments.

A measure lives on finitely many rays: each ray pairs a unit direction with a
radial tail profile Delta(r) (the ray's mass beyond radius r) that is
piecewise power-law between logarithmic knots and continues as a power law at
both ends.  With that structure the tail function, the rescaled measure, all
moment integrals, and inverse-CDF jump sampling are exact closed forms.

The radial distribution function is delta(r) = measure of {|y| > r}; its
reciprocal w = 1/delta is the regularity gauge used throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError

_SIGMA_SLOPE_TOL = 0.1


def _expm1_ratio(e: float, L: float) -> float:
    """(exp(e*L) - 1)/e with the e -> 0 limit L."""
    if e == 0.0:
        return L
    return math.expm1(e * L) / e


@dataclass(frozen=True)
class PiecewisePowerCurve:
    """Positive function, power-law between log-spaced knots and beyond them.

    On [knots[i], knots[i+1]] the value is values[i] * (r/knots[i])**e_i with
    e_i fixed by the endpoint values; below the first knot the exponent is
    slope_left, above the last it is slope_right.
    """

    knots: tuple
    values: tuple
    slope_left: float
    slope_right: float

    @classmethod
    def build(cls, knots, values, slope_left=None, slope_right=None) -> "PiecewisePowerCurve":
        knots = tuple(float(k) for k in knots)
        values = tuple(float(v) for v in values)
        if len(knots) != len(values) or not knots:
            raise ConfigError("curve needs matching nonempty knot/value lists")
        if any(k <= 0 for k in knots) or any(not np.isfinite(k) for k in knots):
            raise ConfigError("curve knots must be positive finite")
        if any(v <= 0 or not np.isfinite(v) for v in values):
            raise ConfigError("curve values must be positive finite")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ConfigError("curve knots must be strictly increasing")
        exps = cls._exponents_from(knots, values)
        if slope_left is None:
            if not exps:
                raise ConfigError("single-knot curve needs explicit end slopes")
            slope_left = exps[0]
        if slope_right is None:
            if not exps:
                raise ConfigError("single-knot curve needs explicit end slopes")
            slope_right = exps[-1]
        return cls(knots, values, float(slope_left), float(slope_right))

    @staticmethod
    def _exponents_from(knots, values) -> list[float]:
        return [
            math.log(values[i + 1] / values[i]) / math.log(knots[i + 1] / knots[i])
            for i in range(len(knots) - 1)
        ]

    @cached_property
    def exponents(self) -> tuple:
        return tuple(self._exponents_from(self.knots, self.values))

    @cached_property
    def _logk(self) -> np.ndarray:
        return np.log(np.asarray(self.knots))

    @cached_property
    def _logv(self) -> np.ndarray:
        return np.log(np.asarray(self.values))

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        scalar = r_arr.ndim == 0
        rr = np.atleast_1d(r_arr)
        if np.any(rr <= 0):
            raise ConfigError("curve evaluated at nonpositive radius")
        logr = np.log(rr)
        logv = np.interp(logr, self._logk, self._logv)
        below = logr < self._logk[0]
        above = logr > self._logk[-1]
        if np.any(below):
            logv[below] = self._logv[0] + self.slope_left * (logr[below] - self._logk[0])
        if np.any(above):
            logv[above] = self._logv[-1] + self.slope_right * (logr[above] - self._logk[-1])
        out = np.exp(logv)
        return float(out[0]) if scalar else out

    def pieces(self):
        """(lo, hi, anchor_radius, anchor_value, exponent) pieces covering (0, inf)."""
        out = [(0.0, self.knots[0], self.knots[0], self.values[0], self.slope_left)]
        for i, e in enumerate(self.exponents):
            out.append((self.knots[i], self.knots[i + 1], self.knots[i], self.values[i], e))
        out.append((self.knots[-1], math.inf, self.knots[-1], self.values[-1], self.slope_right))
        return out

    def scaled(self, radius_factor: float, value_factor: float) -> "PiecewisePowerCurve":
        """Curve r -> value_factor * self(r / radius_factor)... i.e. knots scaled."""
        return PiecewisePowerCurve(
            tuple(k * radius_factor for k in self.knots),
            tuple(v * value_factor for v in self.values),
            self.slope_left,
            self.slope_right,
        )


# ---------------------------------------------------------------------------
# integrals against the measure induced by a decreasing tail curve


def _tail_exponents(curve: PiecewisePowerCurve):
    """Per-piece decay rates g >= 0 (tail ~ r^-g); ends must be strictly positive."""
    gs = [-curve.slope_left] + [-e for e in curve.exponents] + [-curve.slope_right]
    return gs


def _validate_tail(curve: PiecewisePowerCurve):
    gs = _tail_exponents(curve)
    if any(g < -1e-12 for g in gs):
        raise ConfigError("tail profile must be nonincreasing in r")
    if gs[0] <= 0:
        raise ConfigError("tail must diverge at zero (left decay exponent must be positive)")
    if gs[0] >= 2.0:
        raise ConfigError("tail decay exponent at zero must stay below 2 (quadratic integrability)")
    if gs[-1] <= 0:
        raise ConfigError("tail must vanish at infinity (right decay exponent must be positive)")


def tail_moment(curve: PiecewisePowerCurve, alpha: float, lo: float = 0.0, hi: float = math.inf) -> float:
    """integral of r**alpha against the radial measure -dDelta over (lo, hi]."""
    total = 0.0
    for a, b, anchor_r, anchor_v, e in curve.pieces():
        g = -e
        if g <= 1e-15:
            continue
        a_eff = max(a, lo)
        b_eff = min(b, hi)
        if not a_eff < b_eff:
            continue
        if a_eff == 0.0:
            if alpha <= g:
                raise NumericalError(
                    f"divergent inner moment: alpha={alpha} <= tail exponent {g} near zero"
                )
            A = anchor_v * (b_eff / anchor_r) ** e
            total += A * g * b_eff ** alpha / (alpha - g)
        elif b_eff == math.inf:
            if alpha >= g:
                raise NumericalError(
                    f"divergent outer moment: alpha={alpha} >= tail exponent {g} at infinity"
                )
            A = anchor_v * (a_eff / anchor_r) ** e
            total += A * g * a_eff ** alpha / (g - alpha)
        else:
            A = anchor_v * (a_eff / anchor_r) ** e
            L = math.log(b_eff / a_eff)
            total += A * g * a_eff ** alpha * _expm1_ratio(alpha - g, L)
    return total


def tail_weighted_integral(curve: PiecewisePowerCurve, beta: float, lo: float, hi: float) -> float:
    """integral of Delta(s) s**(beta-1) ds over (lo, hi)."""
    total = 0.0
    for a, b, anchor_r, anchor_v, e in curve.pieces():
        g = -e
        a_eff = max(a, lo)
        b_eff = min(b, hi)
        if not a_eff < b_eff:
            continue
        if a_eff == 0.0:
            if beta <= g:
                raise NumericalError(f"divergent tail-weighted integral: beta={beta} <= {g}")
            A = anchor_v * (b_eff / anchor_r) ** e
            total += A * b_eff ** beta / (beta - g)
        elif b_eff == math.inf:
            if beta >= g:
                raise NumericalError(f"divergent tail-weighted integral: beta={beta} >= {g}")
            A = anchor_v * (a_eff / anchor_r) ** e
            total += A * a_eff ** beta / (g - beta)
        else:
            A = anchor_v * (a_eff / anchor_r) ** e
            L = math.log(b_eff / a_eff)
            total += A * a_eff ** beta * _expm1_ratio(beta - g, L)
    return total


def tail_inverse(curve: PiecewisePowerCurve, u) -> np.ndarray:
    """Radii r with Delta(r) = u for a strictly decreasing tail (vectorized)."""
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(uu <= 0):
        raise ConfigError("tail inverse needs positive arguments")
    logv = np.asarray(curve._logv)
    logk = np.asarray(curve._logk)
    logu = np.log(uu)
    out = np.empty_like(logu)
    hi_mask = logu >= logv[0]
    lo_mask = logu <= logv[-1]
    out[hi_mask] = logk[0] + (logu[hi_mask] - logv[0]) / curve.slope_left
    out[lo_mask] = logk[-1] + (logu[lo_mask] - logv[-1]) / curve.slope_right
    mid = ~(hi_mask | lo_mask)
    if np.any(mid):
        # values decrease with the knot index; interpolate on the reversed axis
        out[mid] = np.interp(logu[mid], logv[::-1], logk[::-1])
    return np.exp(out)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ray:
    direction: tuple
    tail: PiecewisePowerCurve

    @cached_property
    def z(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float)


def _unit(vec) -> tuple:
    v = np.asarray(vec, dtype=float)
    n = float(np.linalg.norm(v))
    if not n > 0:
        raise ConfigError("ray direction must be nonzero")
    return tuple(v / n)


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Symbolic Levy measure: kind, dimension, declared order, and its rays."""

    kind: str
    dim: int
    order_sigma: float
    rays: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if not 0.0 < self.order_sigma < 2.0:
            raise ConfigError("order_sigma must lie in (0, 2)")
        if not self.rays:
            raise ConfigError("measure needs at least one ray")
        for ray in self.rays:
            if len(ray.direction) != self.dim:
                raise ConfigError("ray direction dimension mismatch")
            _validate_tail(ray.tail)
        slope = self.zero_end_exponent
        if abs(slope - self.order_sigma) > _SIGMA_SLOPE_TOL:
            raise ConfigError(
                f"declared order sigma={self.order_sigma} inconsistent with "
                f"tail decay exponent {slope:.4f} at zero (tolerance {_SIGMA_SLOPE_TOL})"
            )
        if self.order_sigma < 1.0:
            bad = max(-r.tail.slope_left for r in self.rays)
            if bad >= 1.0:
                raise ConfigError(
                    "sigma < 1 requires every ray tail exponent < 1 near zero "
                    f"(found {bad:.4f})"
                )
        if self.order_sigma == 1.0 and not self.is_symmetric:
            raise ConfigError("sigma = 1 requires a symmetric measure (annulus condition)")
        if self.order_sigma > 1.0:
            bad = min(-r.tail.slope_right for r in self.rays)
            if bad <= 1.0:
                raise ConfigError(
                    "sigma in (1,2) requires integrable first moment beyond radius 1: "
                    f"every ray tail exponent at infinity must exceed 1 (found {bad:.4f})"
                )

    # constructors ---------------------------------------------------------

    @staticmethod
    def isotropic_stable(sigma: float, dim: int, n_directions: int | None = None) -> "LevyMeasureSpec":
        """The measure |y|^(-d-sigma) dy, carried on a symmetric direction set."""
        if not 0.0 < sigma < 2.0:
            raise ConfigError("sigma must lie in (0, 2)")
        if dim == 1:
            dirs = [(1.0,), (-1.0,)]
            weights = [1.0, 1.0]
        elif dim == 2:
            n = n_directions or 64
            if n % 2:
                raise ConfigError("d=2 stable direction count must be even for symmetry")
            angles = 2.0 * np.pi * (np.arange(n) + 0.5) / n
            dirs = [(math.cos(t), math.sin(t)) for t in angles]
            weights = [2.0 * np.pi / n] * n
        else:
            raise ConfigError("isotropic stable supported for dim 1 and 2; pass explicit rays otherwise")
        rays = tuple(
            Ray(_unit(z), PiecewisePowerCurve.build((1.0,), (wgt / sigma,), -sigma, -sigma))
            for z, wgt in zip(dirs, weights)
        )
        return LevyMeasureSpec("stable", dim, float(sigma), rays)

    @staticmethod
    def tabulated_tail(
        r_grid,
        delta_values,
        dim: int,
        sigma: float,
        directions=None,
        weights=None,
        row_weights=None,
    ) -> "LevyMeasureSpec":
        """Tail given on a log grid; angular kernel as a per-row quadrature.

        directions/weights give the angular quadrature (default: the symmetric
        point pair for d=1).  row_weights, if given, has shape
        (len(r_grid), n_directions) with rows summing to 1: the angular share
        at each tabulated radius (piecewise constant between rows).
        """
        r = np.asarray(r_grid, dtype=float)
        dv = np.asarray(delta_values, dtype=float)
        if r.ndim != 1 or r.size < 2:
            raise ConfigError("tabulated tail needs at least two grid radii")
        if dv.shape != r.shape:
            raise ConfigError("tabulated tail grid/value shape mismatch")
        if np.any(np.diff(r) <= 0) or np.any(r <= 0):
            raise ConfigError("tabulated grid must be positive strictly increasing")
        if np.any(dv <= 0) or np.any(np.diff(dv) > 0):
            raise ConfigError("tabulated delta values must be positive nonincreasing")
        if dv[0] / dv[-1] < 1e3:
            raise ConfigError(
                "tabulated tail dynamic range too small: delta at the smallest radius "
                "must exceed the largest-radius value by at least 1e3"
            )
        if directions is None:
            if dim != 1:
                raise ConfigError("explicit directions required for dim > 1 tabulated measures")
            directions = [(1.0,), (-1.0,)]
            weights = [0.5, 0.5]
        if weights is None:
            weights = [1.0 / len(directions)] * len(directions)
        wsum = float(np.sum(weights))
        if not np.isclose(wsum, 1.0, atol=1e-12):
            raise ConfigError("angular quadrature weights must sum to 1")
        rays = []
        for k, (z, wgt) in enumerate(zip(directions, weights)):
            if row_weights is None:
                vals = dv * wgt
            else:
                share = np.asarray(row_weights, dtype=float)[:, k]
                vals = dv * share
                if np.any(np.diff(vals) > 1e-15 * vals[:-1]):
                    raise ConfigError("per-ray tabulated tail must stay nonincreasing")
            rays.append(Ray(_unit(z), PiecewisePowerCurve.build(r, vals)))
        return LevyMeasureSpec("tabulated", dim, float(sigma), tuple(rays))

    @staticmethod
    def radial_angular(
        radial_j,
        angular_a,
        sphere_nodes,
        sphere_weights,
        dim: int,
        sigma: float,
        r_grid=None,
    ) -> "LevyMeasureSpec":
        """Measure a(r,z) j(r) r^(d-1) S(dz) dr built by radial quadrature.

        The per-ray tails are integrated numerically on r_grid (log-spaced,
        default 1e-6..1e6) and interpolated as piecewise power laws; the
        angular factor should be piecewise constant between grid radii.
        """
        if r_grid is None:
            r_grid = np.geomspace(1e-6, 1e6, 289)
        r = np.asarray(r_grid, dtype=float)
        if np.any(np.diff(r) <= 0) or np.any(r <= 0):
            raise ConfigError("radial grid must be positive strictly increasing")
        # Gauss-Legendre nodes in log s on every grid segment
        gl_x, gl_w = np.polynomial.legendre.leggauss(8)
        lo, hi = np.log(r[:-1]), np.log(r[1:])
        mid = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * gl_x[None, :]
        s_nodes = np.exp(mid)
        s_w = 0.5 * (hi - lo)[:, None] * gl_w[None, :] * s_nodes  # ds = s d(log s)
        rays = []
        for z, wgt in zip(sphere_nodes, sphere_weights):
            if wgt < 0:
                raise ConfigError("sphere weights must be nonnegative")
            if wgt == 0:
                continue
            zz = _unit(z)
            h = angular_a(s_nodes, zz) * radial_j(s_nodes) * s_nodes ** (dim - 1)
            if np.any(~np.isfinite(h)) or np.any(h < 0):
                raise ConfigError("angular/radial data must be finite and nonnegative")
            seg = np.sum(h * s_w, axis=1)
            # power continuation beyond the last grid radius
            h_end = float(h[-1, -1])
            h_prev = float(h[-1, 0])
            s_end, s_prev = float(s_nodes[-1, -1]), float(s_nodes[-1, 0])
            slope = (math.log(max(h_end, 1e-300)) - math.log(max(h_prev, 1e-300))) / math.log(
                s_end / s_prev
            )
            if slope >= -1.0:
                raise NumericalError(
                    f"non-integrable tail: radial density decays like r^{slope:.3f} "
                    f"at radius {r[-1]:.3e}"
                )
            tail_beyond = h_end * s_end / (-1.0 - slope)
            cum = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]]) + tail_beyond
            vals = wgt * cum
            if vals[-1] <= 0:
                raise NumericalError(f"vanishing tail beyond radius {r[-1]:.3e}")
            rays.append(Ray(zz, PiecewisePowerCurve.build(r, vals)))
        return LevyMeasureSpec("radial_angular", dim, float(sigma), tuple(rays))

    @staticmethod
    def from_config(cfg: dict) -> "LevyMeasureSpec":
        kind = cfg.get("kind")
        if kind == "stable":
            return LevyMeasureSpec.isotropic_stable(
                float(cfg["sigma"]), int(cfg.get("dim", 1)), cfg.get("n_directions")
            )
        if kind == "tabulated":
            if "csv" in cfg:
                r, dv = _read_tail_csv(cfg["csv"])
            else:
                r, dv = cfg["r_grid"], cfg["delta"]
            return LevyMeasureSpec.tabulated_tail(
                r,
                dv,
                int(cfg.get("dim", 1)),
                float(cfg["sigma"]),
                directions=cfg.get("directions"),
                weights=cfg.get("weights"),
            )
        if kind == "piecewise_power":
            # convenience: tail c * r^-g0 for r<=1, c * r^-g1 for r>1
            g0, g1 = float(cfg["g_zero"]), float(cfg["g_inf"])
            c = float(cfg.get("scale", 1.0))
            r = np.geomspace(cfg.get("r_min", 1e-8), cfg.get("r_max", 1e8), 65)
            dv = np.where(r <= 1.0, c * r ** (-g0), c * r ** (-g1))
            return LevyMeasureSpec.tabulated_tail(r, dv, int(cfg.get("dim", 1)), float(cfg["sigma"]))
        raise ConfigError(f"unknown measure kind: {kind!r}")

    # evaluation -----------------------------------------------------------

    def delta(self, r):
        """Tail function: mass outside radius r."""
        rr = np.asarray(r, dtype=float)
        out = np.zeros_like(np.atleast_1d(rr), dtype=float)
        for ray in self.rays:
            out = out + np.atleast_1d(ray.tail(rr))
        return float(out[0]) if rr.ndim == 0 else out

    def w(self, r):
        d = self.delta(r)
        return 1.0 / d

    @cached_property
    def zero_end_exponent(self) -> float:
        """Decay exponent of delta at zero: the measure's effective order."""
        return max(-ray.tail.slope_left for ray in self.rays)

    @cached_property
    def infinity_end_exponent(self) -> float:
        return min(-ray.tail.slope_right for ray in self.rays)

    @cached_property
    def is_symmetric(self) -> bool:
        probes = self._symmetry_probes()
        grouped: dict[tuple, np.ndarray] = {}
        for ray in self.rays:
            key = tuple(round(c, 9) for c in ray.direction)
            vals = np.atleast_1d(ray.tail(probes))
            grouped[key] = grouped.get(key, 0.0) + vals
        for key, vals in grouped.items():
            mirror = tuple(-c if c != 0.0 else 0.0 for c in key)
            other = grouped.get(mirror)
            if other is None:
                return False
            if not np.allclose(vals, other, rtol=1e-9, atol=0.0):
                return False
        return True

    def _symmetry_probes(self) -> np.ndarray:
        lo = min(ray.tail.knots[0] for ray in self.rays)
        hi = max(ray.tail.knots[-1] for ray in self.rays)
        return np.geomspace(lo / 2, hi * 2, 33)

    def moment_inside(self, alpha: float, radius: float = 1.0) -> float:
        """integral of |y|^alpha over |y| <= radius."""
        return sum(tail_moment(ray.tail, alpha, 0.0, radius) for ray in self.rays)

    def moment_outside(self, alpha: float, radius: float = 1.0) -> float:
        return sum(tail_moment(ray.tail, alpha, radius, math.inf) for ray in self.rays)

    def directional_second_moment(self, xi_hat, radius: float) -> float:
        """integral of |xi_hat . y|^2 over |y| <= radius."""
        xh = np.asarray(xi_hat, dtype=float)
        total = 0.0
        for ray in self.rays:
            proj = float(np.dot(xh, ray.z)) ** 2
            if proj > 0:
                total += proj * tail_moment(ray.tail, 2.0, 0.0, radius)
        return total

    def first_moment_vector(self, lo: float, hi: float = math.inf) -> np.ndarray:
        """integral of y over lo < |y| <= hi (vector)."""
        out = np.zeros(self.dim)
        for ray in self.rays:
            out += ray.z * tail_moment(ray.tail, 1.0, lo, hi)
        return out

    def rescaled(self, R: float) -> "LevyMeasureSpec":
        """The tail-normalized measure w(R) * nu(R dy)."""
        if not R > 0:
            raise ConfigError("rescale radius must be positive")
        wR = float(self.w(R))
        rays = tuple(
            Ray(ray.direction, ray.tail.scaled(1.0 / R, wR)) for ray in self.rays
        )
        return LevyMeasureSpec(self.kind, self.dim, self.order_sigma, rays)

    def reflected(self) -> "LevyMeasureSpec":
        """nu*(dy) = nu(-dy)."""
        rays = tuple(
            Ray(tuple(-c if c != 0.0 else 0.0 for c in ray.direction), ray.tail)
            for ray in self.rays
        )
        return LevyMeasureSpec(self.kind, self.dim, self.order_sigma, rays)

    def content_key(self) -> str:
        """Deterministic fingerprint used in provenance metadata."""
        parts = [self.kind, str(self.dim), repr(self.order_sigma)]
        for ray in self.rays:
            parts.append(repr(ray.direction))
            parts.append(repr(ray.tail.knots))
            parts.append(repr(ray.tail.values))
            parts.append(repr((ray.tail.slope_left, ray.tail.slope_right)))
        import hashlib

        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def _read_tail_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append((float(row[0]), float(row[1])))
    if len(rows) < 2:
        raise ConfigError(f"tail CSV {path} needs at least two rows")
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1]


# ---------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class TailProfile:
    """Radial distribution function delta and gauge w = 1/delta on a grid.

    delta_fn/w_fn evaluate off-grid (exactly for measure-derived and
    function-derived profiles).
    """

    grid: np.ndarray
    delta: np.ndarray
    w: np.ndarray
    w_fn: object = field(repr=False, default=None)

    def __post_init__(self):
        if np.any(np.abs(self.w * self.delta - 1.0) > 1e-12) or np.any(self.w <= 0):
            raise ConfigError("tail profile must satisfy w * delta = 1 with w > 0")

    @classmethod
    def from_measure(cls, spec: LevyMeasureSpec, grid) -> "TailProfile":
        g = np.asarray(grid, dtype=float)
        dv = spec.delta(g)
        return cls(g, dv, 1.0 / dv, w_fn=lambda r: 1.0 / spec.delta(r))

    @classmethod
    def from_w_function(cls, w_fn, grid) -> "TailProfile":
        g = np.asarray(grid, dtype=float)
        wv = np.asarray(w_fn(g), dtype=float)
        return cls(g, 1.0 / wv, wv, w_fn=w_fn)

    def w_at(self, r):
        if self.w_fn is not None:
            return self.w_fn(np.asarray(r, dtype=float))
        curve = PiecewisePowerCurve.build(self.grid, self.w)
        return curve(r)

    def delta_at(self, r):
        return 1.0 / self.w_at(r)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])


@dataclass(frozen=True)
class ScaledMeasure:
    """nu~_R(dy) = w(R) nu(R dy), with the transformed spec materialized."""

    base: LevyMeasureSpec
    R: float
    measure: LevyMeasureSpec = None

    def __post_init__(self):
        if self.measure is None:
            object.__setattr__(self, "measure", self.base.rescaled(self.R))
        unit_tail = self.measure.delta(1.0)
        if abs(unit_tail - 1.0) > 1e-9:
            raise NumericalError(f"rescaled tail at radius 1 is {unit_tail}, expected 1")


def tail_function(spec: LevyMeasureSpec, grid) -> TailProfile:
    """Radial distribution function of the measure on the given radii."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ConfigError("tail grid must be a nonempty 1-d array")
    if np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise ConfigError("tail grid must be positive strictly increasing")
    return TailProfile.from_measure(spec, g)


def rescale(spec: LevyMeasureSpec, R: float) -> ScaledMeasure:
    """Tail-normalized rescaling; unit mass outside radius 1 by construction."""
    if not (np.isfinite(R) and R > 0):
        raise ConfigError("rescale radius must be positive and finite")
    if spec.kind == "tabulated":
        lo = min(ray.tail.knots[0] for ray in spec.rays)
        hi = max(ray.tail.knots[-1] for ray in spec.rays)
        if not lo <= R <= hi:
            raise ConfigError(
                f"rescale radius {R} outside the tabulated range [{lo}, {hi}] "
                "(extrapolation not allowed for tabulated tails)"
            )
    return ScaledMeasure(spec, float(R))


def moment_integrals(m: ScaledMeasure, alpha1: float, alpha2: float) -> tuple[float, float]:
    """(inner, outer) moments of the rescaled measure split at radius 1.

    inner = integral of |y|^alpha1 over |y| <= 1, outer = integral of
    |y|^alpha2 over |y| > 1.  Divergent combinations raise.
    """
    if not alpha2 > 0:
        raise ConfigError("alpha2 must be positive")
    if not alpha1 > 0:
        raise ConfigError("alpha1 must be positive")
    inner = m.measure.moment_inside(alpha1, 1.0)
    outer = m.measure.moment_outside(alpha2, 1.0)
    return inner, outer


def symmetrize(spec: LevyMeasureSpec) -> LevyMeasureSpec:
    """(1/2)(nu(dy) + nu(-dy)); returns the input when already symmetric."""
    if spec.is_symmetric:
        return spec
    rays = []
    for ray in spec.rays:
        half = ray.tail.scaled(1.0, 0.5)
        rays.append(Ray(ray.direction, half))
        mirror = tuple(-c if c != 0.0 else 0.0 for c in ray.direction)
        rays.append(Ray(mirror, half))
    sym = LevyMeasureSpec(spec.kind, spec.dim, spec.order_sigma, tuple(rays))
    return sym
