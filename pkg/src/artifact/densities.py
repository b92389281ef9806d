"""Transition densities and operator kernels through the spectral route.

exp(t psi) is a characteristic function, so the density is its inverse
transform and every generator-type operator acts as a Fourier multiplier on
the same array.  The scaling identity p(t, x) = a^-d p_resc(1, x/a) is
checked by computing the rescaled density independently and interpolating it
back onto the original lattice (cubic, so the interpolation error stays an
order below the model error being tested).

Transform jobs over (t, op) pairs are independent and may run concurrently;
fields are immutable after construction.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .errors import ConfigError, NumericalError
from .lattice import FrequencyGrid
from .measures import LevyMeasureSpec, Ray, moment_integrals, rescale, symmetrize
from .persist import save_array
from .symbols import SymbolField, compute_symbol, fractional_symbol

_MASS_TOL = 1e-6
_RING_FLOOR = -1e-8
_IMAG_TOL = 1e-10
_DECAY_LEVEL = 1e-12


@dataclass(frozen=True)
class SignedMeasurePair:
    """Difference pi = plus - minus of two admissible measures."""

    plus: LevyMeasureSpec
    minus: LevyMeasureSpec

    def __post_init__(self):
        if self.plus.dim != self.minus.dim:
            raise ConfigError("signed pair components must share the dimension")
        if self.plus.order_sigma != self.minus.order_sigma:
            raise ConfigError("signed pair components must share the order sigma")

    def absolute(self) -> LevyMeasureSpec:
        """|pi| = plus + minus, the measure entering the moment bounds."""
        return LevyMeasureSpec(
            "tabulated" if self.plus.kind != self.minus.kind else self.plus.kind,
            self.plus.dim,
            self.plus.order_sigma,
            self.plus.rays + self.minus.rays,
        )

    def moment_bound(self, alpha1: float, alpha2: float, R_grid) -> float:
        """sup over R of the split moments of the rescaled |pi|."""
        total = self.absolute()
        vals = [sum(moment_integrals(rescale(total, R), alpha1, alpha2)) for R in R_grid]
        return float(max(vals))


# ---------------------------------------------------------------------------
# multiplier operators


@dataclass(frozen=True)
class IdentityOp:
    @property
    def label(self) -> str:
        return "identity"

    def multiplier(self, grid: FrequencyGrid) -> np.ndarray:
        return np.ones(grid.shape, dtype=complex)


@dataclass(frozen=True)
class GeneratorOp:
    """L^pi as the multiplier psi_plus - psi_minus."""

    plus: LevyMeasureSpec
    minus: LevyMeasureSpec = None

    @property
    def label(self) -> str:
        if self.minus is None:
            return f"L[{self.plus.content_key()}]"
        return f"L[{self.plus.content_key()}-{self.minus.content_key()}]"

    def multiplier(self, grid: FrequencyGrid) -> np.ndarray:
        mult = compute_symbol(self.plus, grid).values.astype(complex)
        if self.minus is not None:
            mult = mult - compute_symbol(self.minus, grid).values
        return mult


@dataclass(frozen=True)
class DerivativeOp:
    """D^k as the multiplier prod (i 2 pi xi_c)^k_c."""

    orders: tuple

    @property
    def label(self) -> str:
        return f"D{self.orders}"

    def multiplier(self, grid: FrequencyGrid) -> np.ndarray:
        if len(self.orders) != grid.dim:
            raise ConfigError("derivative multiindex length must match the dimension")
        mult = np.ones(grid.shape, dtype=complex)
        for coord, k in zip(grid.freq_nodes(), self.orders):
            if k:
                mult = mult * (2j * np.pi * coord) ** int(k)
        return mult


@dataclass(frozen=True)
class FractionalOp:
    """L^{mu;delta}: the multiplier -(-psi^{mu_sym})^delta."""

    base: LevyMeasureSpec
    delta: float

    @property
    def label(self) -> str:
        return f"Lfrac[{self.base.content_key()};{self.delta:g}]"

    def multiplier(self, grid: FrequencyGrid) -> np.ndarray:
        field = compute_symbol(self.base, grid)
        return fractional_symbol(field, self.delta).values.astype(complex)


@dataclass(frozen=True)
class ComposedOp:
    parts: tuple

    @property
    def label(self) -> str:
        return "*".join(p.label for p in self.parts)

    def multiplier(self, grid: FrequencyGrid) -> np.ndarray:
        mult = np.ones(grid.shape, dtype=complex)
        for part in self.parts:
            mult = mult * part.multiplier(grid)
        return mult


@dataclass(frozen=True)
class ScaledSumOp:
    coefficients: tuple
    parts: tuple

    @property
    def label(self) -> str:
        return "+".join(f"{c:g}*{p.label}" for c, p in zip(self.coefficients, self.parts))

    def multiplier(self, grid: FrequencyGrid) -> np.ndarray:
        mult = np.zeros(grid.shape, dtype=complex)
        for coef, part in zip(self.coefficients, self.parts):
            mult = mult + coef * part.multiplier(grid)
        return mult


def identity_op() -> IdentityOp:
    return IdentityOp()


def generator(pi) -> GeneratorOp:
    """L^pi for a measure or a signed pair."""
    if isinstance(pi, SignedMeasurePair):
        return GeneratorOp(pi.plus, pi.minus)
    return GeneratorOp(pi)


def derivative(orders) -> DerivativeOp:
    orders = (orders,) if np.ndim(orders) == 0 else tuple(int(k) for k in orders)
    if any(k < 0 for k in orders):
        raise ConfigError("derivative orders must be nonnegative")
    return DerivativeOp(tuple(int(k) for k in orders))


def fractional_generator(mu: LevyMeasureSpec, delta: float) -> FractionalOp:
    if not 0.0 < delta <= 1.0:
        raise ConfigError("fractional order delta must lie in (0, 1]")
    return FractionalOp(symmetrize(mu), float(delta))


def compose(*ops) -> ComposedOp:
    if not ops:
        raise ConfigError("compose needs at least one operator")
    return ComposedOp(tuple(ops))


def combine(coefficients, ops) -> ScaledSumOp:
    if len(coefficients) != len(ops) or not ops:
        raise ConfigError("combine needs matching nonempty coefficient/operator lists")
    return ScaledSumOp(tuple(float(c) for c in coefficients), tuple(ops))


# ---------------------------------------------------------------------------
# density fields


@dataclass(frozen=True)
class DensityField:
    """Real lattice kernel: a transition density or an operator-applied one."""

    grid: FrequencyGrid
    t: float
    values: np.ndarray
    kind: str
    symbol_key: str = ""
    op_label: str = ""

    def __post_init__(self):
        if self.kind not in ("density", "kernel"):
            raise ConfigError(f"unknown density kind {self.kind!r}")
        if not (np.isfinite(self.t) and self.t > 0):
            raise ConfigError("density time must be positive and finite")
        if np.iscomplexobj(self.values):
            raise ConfigError("density values must be real (imaginary residue is discarded upstream)")
        if self.values.shape != self.grid.shape:
            raise ConfigError("density values do not match the lattice shape")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("density field contains nonfinite values")
        if self.kind == "density":
            mass = self.mass()
            if abs(mass - 1.0) > _MASS_TOL:
                raise NumericalError(f"density mass {mass:.9f} deviates from 1 beyond {_MASS_TOL}")
            low = float(np.min(self.values))
            if low < _RING_FLOOR:
                warnings.warn(
                    f"density dips to {low:.3e}: spectral ringing beyond the {_RING_FLOOR} floor",
                    RuntimeWarning,
                    stacklevel=2,
                )

    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def abs_integral(self) -> float:
        return self.grid.integrate(np.abs(self.values))

    def tail_abs_integral(self, radius: float) -> float:
        """integral of |values| over |x| > radius."""
        mask = self.grid.space_radius > radius
        return float(np.sum(np.abs(self.values)[mask]) * self.grid.cell_volume)

    def weighted_abs_integral(self, alpha: float) -> float:
        """integral of (1 + |x|^alpha) |values| dx."""
        weight = 1.0 + self.grid.space_radius ** alpha
        return self.grid.integrate(weight * np.abs(self.values))

    def save(self, path_base):
        meta = {
            "t": self.t,
            "lattice": {"dim": self.grid.dim, "M": self.grid.size, "extent": self.grid.extent},
            "kind": self.kind,
            "symbol_key": self.symbol_key,
            "op": self.op_label,
        }
        save_array(path_base, self.values, meta)

    def radial_profile_csv(self, path, n_bins: int = 96):
        """Profile for plotting: (x, value) rows in d=1, radial bin means above."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.grid.dim == 1:
                writer.writerow(["x", "value"])
                order = np.argsort(self.grid.space_axis())
                for x, v in zip(self.grid.space_axis()[order], self.values[order]):
                    writer.writerow([f"{x:.12g}", f"{v:.12g}"])
                return
            writer.writerow(["radius", "mean_value"])
            radius = self.grid.space_radius.ravel()
            vals = self.values.ravel()
            edges = np.linspace(0.0, float(np.max(radius)), n_bins + 1)
            which = np.clip(np.digitize(radius, edges) - 1, 0, n_bins - 1)
            for b in range(n_bins):
                sel = which == b
                if np.any(sel):
                    writer.writerow(
                        [f"{0.5 * (edges[b] + edges[b + 1]):.12g}", f"{np.mean(vals[sel]):.12g}"]
                    )


def _boundary_mask(grid: FrequencyGrid) -> np.ndarray:
    cut = grid.extent - 1.5 * grid.freq_spacing
    mask = np.zeros(grid.shape, dtype=bool)
    for coord in grid.freq_nodes():
        mask = mask | (np.abs(coord) > cut)
    return mask


def _require_spectral_decay(symbol: SymbolField, t: float, char_abs: np.ndarray, scale: float):
    """The spectrum must fall below the inversion floor before the lattice edge."""
    grid = symbol.grid
    edge = float(np.max(char_abs[_boundary_mask(grid)]))
    limit = _DECAY_LEVEL * max(scale, 1.0)
    if edge <= limit:
        return
    # estimate the extent that would suffice from the symbol's own growth
    re = symbol.values.real
    radius = grid.freq_radius
    inner = (radius > 0.4 * grid.extent) & (radius < 0.6 * grid.extent)
    q_half = -t * float(np.max(re[inner])) if np.any(inner) else 0.0
    q_edge = -t * float(np.max(re[_boundary_mask(grid)]))
    if q_edge > q_half > 0:
        kappa = max(math.log(q_edge / q_half) / math.log(2.0), 0.2)
        target = math.log(max(scale, 1.0) / _DECAY_LEVEL)
        required = grid.extent * (target / q_edge) ** (1.0 / kappa)
        hint = f"; frequency extent of about {required:.3g} needed"
    else:
        hint = ""
    raise NumericalError(
        f"grid under-resolved for t={t:g}: spectrum level {edge:.3e} at the "
        f"frequency boundary exceeds {limit:.1e}{hint}"
    )


def _to_real(raw: np.ndarray, what: str) -> np.ndarray:
    residue = float(np.max(np.abs(raw.imag)))
    scale = max(float(np.max(np.abs(raw.real))), 1e-300)
    if residue > _IMAG_TOL * scale:
        raise NumericalError(
            f"{what} has imaginary residue {residue:.3e} against scale {scale:.3e}"
        )
    return np.ascontiguousarray(raw.real)


def density(symbol: SymbolField, t: float) -> DensityField:
    """Transition density at time t from a full generator symbol."""
    if symbol.kind != "full":
        raise ConfigError("density needs a full generator symbol")
    if not (np.isfinite(t) and t > 0):
        raise ConfigError("density time must be positive and finite")
    char = np.exp(t * symbol.values)
    _require_spectral_decay(symbol, t, np.abs(char), 1.0)
    vals = _to_real(symbol.grid.density_from_char(char), "density")
    return DensityField(symbol.grid, float(t), vals, "density", symbol.measure_key, "identity")


def apply_operator(symbol: SymbolField, t: float, op) -> DensityField:
    """Kernel of op applied to the transition density, via its multiplier."""
    if symbol.kind != "full":
        raise ConfigError("apply_operator needs a full generator symbol")
    if not (np.isfinite(t) and t > 0):
        raise ConfigError("kernel time must be positive and finite")
    mult = np.asarray(op.multiplier(symbol.grid), dtype=complex)
    if mult.shape != symbol.grid.shape:
        raise ConfigError("operator multiplier does not match the lattice shape")
    char = mult * np.exp(t * symbol.values)
    scale = float(np.max(np.abs(char)))
    _require_spectral_decay(symbol, t, np.abs(char), scale)
    kind = "density" if isinstance(op, IdentityOp) else "kernel"
    vals = _to_real(symbol.grid.density_from_char(char), f"kernel {op.label}")
    return DensityField(symbol.grid, float(t), vals, kind, symbol.measure_key, op.label)


# ---------------------------------------------------------------------------
# scaling identity


def _rescaled_with_mass(spec: LevyMeasureSpec, R: float, mass: float) -> LevyMeasureSpec:
    """mass * spec(R dy): rescaling with an externally supplied gauge value."""
    rays = tuple(Ray(ray.direction, ray.tail.scaled(1.0 / R, mass)) for ray in spec.rays)
    return LevyMeasureSpec(spec.kind, spec.dim, spec.order_sigma, rays)


def _lattice_interpolator(grid: FrequencyGrid, values: np.ndarray):
    axis = np.fft.fftshift(grid.space_axis())
    data = np.fft.fftshift(values)
    if grid.dim == 1:
        spline = CubicSpline(axis, data)
        return lambda pts: spline(pts[:, 0])
    interp = RegularGridInterpolator(
        (axis,) * grid.dim, data, method="cubic", bounds_error=True
    )
    return interp


def _window_points(grid: FrequencyGrid, a: float):
    """Lattice nodes whose rescaled image x/a stays inside the lattice box."""
    coords = np.stack(np.broadcast_arrays(*grid.space_nodes()), axis=-1)
    flat = coords.reshape(-1, grid.dim)
    lo = float(np.min(grid.space_axis()))
    hi = float(np.max(grid.space_axis()))
    queries = flat / a
    inside = np.all((queries >= lo) & (queries <= hi), axis=1)
    if int(np.sum(inside)) < 16:
        raise ConfigError(
            f"rescaled lattice covers too little of the comparison window at a={a:.4g}; "
            "interpolation would leave the density support"
        )
    return inside, queries[inside]


def scaling_identity_check(
    spec: LevyMeasureSpec,
    w,
    a,
    t_grid,
    grid: FrequencyGrid = None,
    mu: LevyMeasureSpec = None,
    delta: float = 0.5,
) -> dict:
    """Compare p(t, x) with a(t)^-d p_resc(1, x/a(t)) node by node.

    w must be the tail gauge of spec and a its generalized inverse.  The
    fractional variant t^-delta a^-d (L^{mu_resc;delta} p_resc)(1, x/a) is
    checked alongside, with mu defaulting to the symmetrized spec.
    """
    if grid is None:
        grid = FrequencyGrid(spec.dim, 4096 if spec.dim == 1 else 128, 8.0)
    mu_sym = symmetrize(mu if mu is not None else spec)
    base_symbol = compute_symbol(spec, grid)
    peak_norm = None
    per_t = []
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        a_t = float(a(t))
        left = density(base_symbol, t)
        left_frac = apply_operator(base_symbol, t, FractionalOp(mu_sym, delta))
        resc = rescale(spec, a_t).measure
        resc_symbol = compute_symbol(resc, grid)
        right = density(resc_symbol, 1.0)
        gauge_at_a = float(w.w_at(a_t))
        mu_resc = _rescaled_with_mass(mu_sym, a_t, gauge_at_a)
        right_frac = apply_operator(resc_symbol, 1.0, FractionalOp(mu_resc, delta))

        inside, queries = _window_points(grid, a_t)
        scale_d = a_t ** (-grid.dim)
        want = scale_d * _lattice_interpolator(grid, right.values)(queries)
        got = left.values.reshape(-1)[inside]
        peak_norm = left.sup_abs()
        diff = np.abs(got - want)
        linf_rel = float(np.max(diff)) / peak_norm
        l1_rel = float(np.sum(diff)) / max(float(np.sum(np.abs(got))), 1e-300)

        want_f = (t ** -delta) * scale_d * _lattice_interpolator(grid, right_frac.values)(queries)
        got_f = left_frac.values.reshape(-1)[inside]
        frac_rel = float(np.max(np.abs(got_f - want_f))) / left_frac.sup_abs()

        per_t.append(
            {
                "t": float(t),
                "a": a_t,
                "linf_rel": linf_rel,
                "l1_rel": l1_rel,
                "frac_linf_rel": frac_rel,
                "n_window": int(queries.shape[0]),
            }
        )
    return {
        "per_t": per_t,
        "max_linf_rel": max(e["linf_rel"] for e in per_t),
        "max_l1_rel": max(e["l1_rel"] for e in per_t),
        "max_frac_linf_rel": max(e["frac_linf_rel"] for e in per_t),
        "delta": float(delta),
    }


# ---------------------------------------------------------------------------
# kernel estimate statistics


def _normalized_orders(k, dim: int) -> tuple:
    if np.ndim(k) == 0:
        if dim != 1:
            raise ConfigError("scalar derivative order only makes sense in d=1")
        return (int(k),)
    orders = tuple(int(c) for c in k)
    if len(orders) != dim:
        raise ConfigError("derivative multiindex length must match the dimension")
    return orders


def _spectral_derivative(field: DensityField, orders: tuple) -> np.ndarray:
    mult = DerivativeOp(orders).multiplier(field.grid)
    return _to_real(field.grid.apply_multiplier(mult, field.values), f"derivative D{orders}")


def decay_moment_check(
    field: DensityField,
    alpha2: float,
    derivatives,
    spec: LevyMeasureSpec = None,
    R_grid=None,
) -> dict:
    """sup and |x|^alpha2-weighted L1 statistics of D^k applied to the field.

    With spec given the same statistics are recomputed for the rescaled
    measures over R_grid (uniformity sweep) and on a doubled spatial box
    (divergence probe: growth beyond 20 percent flags the weighted moment as
    divergent rather than erroring).
    """
    if not alpha2 > 0:
        raise ConfigError("alpha2 must be positive")
    orders_list = [_normalized_orders(k, field.grid.dim) for k in derivatives]

    def stats(f: DensityField) -> list:
        weight = 1.0 + f.grid.space_radius ** alpha2
        rows = []
        for orders in orders_list:
            dv = _spectral_derivative(f, orders)
            sup = float(np.max(np.abs(dv)))
            weighted = f.grid.integrate(weight * np.abs(dv))
            if not (np.isfinite(sup) and np.isfinite(weighted)):
                raise NumericalError(f"decay statistic for D{orders} is not finite")
            rows.append(
                {
                    "k": orders,
                    "sup": sup,
                    "weighted_l1": weighted,
                    "statistic": sup + weighted,
                    "value_at_origin": float(dv[(0,) * f.grid.dim]),
                }
            )
        return rows

    report = {"alpha2": float(alpha2), "per_k": stats(field)}
    if spec is None:
        return report
    if field.op_label != "identity":
        raise ConfigError("the R-sweep and divergence probe need a plain density field")

    R_values = np.geomspace(0.1, 10.0, 5) if R_grid is None else np.asarray(R_grid, dtype=float)
    sweep = []
    for R in R_values:
        resc_field = density(compute_symbol(rescale(spec, float(R)).measure, field.grid), field.t)
        sweep.append([row["statistic"] for row in stats(resc_field)])
    sweep = np.asarray(sweep)
    spread = (np.max(sweep, axis=0) - np.min(sweep, axis=0)) / np.max(sweep, axis=0)
    report["R_grid"] = [float(R) for R in R_values]
    report["R_sweep_statistics"] = sweep.tolist()
    report["R_sweep_relative_spread"] = [float(s) for s in spread]

    wide = FrequencyGrid(field.grid.dim, field.grid.size * 2, field.grid.extent)
    wide_field = density(compute_symbol(spec, wide), field.t)
    growth = []
    for row, orders in zip(report["per_k"], orders_list):
        dv = _spectral_derivative(wide_field, orders)
        weighted = wide.integrate((1.0 + wide.space_radius ** alpha2) * np.abs(dv))
        growth.append(weighted / row["weighted_l1"])
    report["extent_doubling_growth"] = [float(g) for g in growth]
    report["expected_divergence"] = [bool(g >= 1.2) for g in growth]
    return report


def kernel_difference_statistics(
    symbol: SymbolField, op, t: float, s_shift: float, y_shift
) -> tuple[float, float]:
    """L1 norms of the space- and time-shifted kernel differences.

    space: integral of |(op p)(t, x - y) - (op p)(t, x)| dx, formed on the
    characteristic side where the shift is the phase exp(i 2 pi xi.y);
    time: the same for (op p)(t - s, .) against (op p)(t, .).
    """
    if symbol.kind != "full":
        raise ConfigError("kernel differences need a full generator symbol")
    if not (np.isfinite(t) and t > 0):
        raise ConfigError("kernel time must be positive and finite")
    if not t > abs(s_shift):
        raise ConfigError(f"time difference needs t > |s_shift| (got t={t:g}, s={s_shift:g})")
    grid = symbol.grid
    mult = np.asarray(op.multiplier(grid), dtype=complex)
    char_t = mult * np.exp(t * symbol.values)
    scale = float(np.max(np.abs(char_t)))
    _require_spectral_decay(symbol, t, np.abs(char_t), scale)

    y = np.atleast_1d(np.asarray(y_shift, dtype=float))
    shift = np.conj(grid.shift_phase(y))
    space_vals = grid.density_from_char((shift - 1.0) * char_t)
    space_diff = float(np.sum(np.abs(space_vals)) * grid.cell_volume)

    if s_shift == 0.0:
        return space_diff, 0.0
    char_s = mult * np.exp((t - s_shift) * symbol.values)
    _require_spectral_decay(symbol, t - s_shift, np.abs(char_s), float(np.max(np.abs(char_s))))
    time_vals = grid.density_from_char(char_s - char_t)
    time_diff = float(np.sum(np.abs(time_vals)) * grid.cell_volume)
    return space_diff, time_diff
