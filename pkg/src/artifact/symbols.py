"""Characteristic exponents and the Fourier multipliers built from them.

Per ray the exponent reduces to one-dimensional integrals of an oscillatory
kernel against the piecewise-power radial tail.  After substituting
u = |theta| r each piece needs W(g, v) = int f(u) u^(-g-1) du over a
u-interval, with f = cos u - 1 for symmetric measures and e^{iu} - 1
(compensated by -iu when the order exceeds one) for one-sided ones.  W is
assembled from three regimes: a Taylor series below u = 1e-3, cached
cumulative Gauss-Legendre panel tables up to u = 128 (log panels below
2 pi, quarter-period panels above), and integration-by-parts asymptotics
beyond.  Pure power rays bypass all of it through Gamma-function closed
forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma as _gamma

from .errors import ConfigError, NumericalError
from .lattice import FrequencyGrid
from .measures import LevyMeasureSpec, ScaledMeasure, TailProfile
from .orv import ratio_functions

U_TAYLOR = 1e-3
U_ASYMPTOTIC = 128.0
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)

# e^{iu} - 1 power series coefficients, n = 1..8
_EXP_COEFF = [1j ** n / math.factorial(n) for n in range(1, 9)]
_COS_COEFF = [((-1) ** (n // 2) / math.factorial(n), n) for n in range(2, 10, 2)]


def _f_kernel(mode: str, u: np.ndarray) -> np.ndarray:
    if mode == "cos":
        return -2.0 * np.sin(u / 2.0) ** 2
    if mode == "exp0":
        return -2.0 * np.sin(u / 2.0) ** 2 + 1j * np.sin(u)
    raise ConfigError(f"unknown kernel mode {mode!r}")


def _power_int(exponent: float, lo, hi):
    """int_lo^hi u^(exponent-1) du with the log branch at exponent = 0."""
    if abs(exponent) < 1e-12:
        return np.log(np.asarray(hi, dtype=float) / lo)
    return (hi ** exponent - lo ** exponent) / exponent


def _series_terms(mode: str):
    if mode == "cos":
        return _COS_COEFF
    return [(c, n) for n, c in enumerate(_EXP_COEFF, start=1)]


def _taylor_from_zero(mode: str, g: float, v: np.ndarray) -> np.ndarray:
    """int_0^v f u^(-g-1) du for v <= U_TAYLOR."""
    if mode == "cos":
        if not g < 2.0:
            raise NumericalError("kernel integral from zero needs decay exponent < 2")
    elif not g < 1.0:
        raise NumericalError("uncompensated kernel integral from zero needs exponent < 1")
    out = np.zeros(np.shape(v), dtype=complex)
    for c, n in _series_terms(mode):
        out = out + c * v ** (n - g) / (n - g)
    return out


def _taylor_between(mode: str, g: float, v: np.ndarray) -> np.ndarray:
    """int_v^U_TAYLOR f u^(-g-1) du for v <= U_TAYLOR, any g > 0."""
    out = np.zeros(np.shape(v), dtype=complex)
    for c, n in _series_terms(mode):
        out = out + c * _power_int(n - g, v, U_TAYLOR)
    return out


def _asymptotic_tail(mode: str, g: float, v: np.ndarray) -> np.ndarray:
    """int_v^inf f u^(-g-1) du for v >= U_ASYMPTOTIC."""
    s = g + 1.0
    term = 1j * np.asarray(v, dtype=complex) ** (-s)
    acc = term.copy()
    for k in range(7):
        term = term * (-1j) * (s + k) / v
        acc = acc + term
    osc = np.exp(1j * v) * acc  # int_v^inf e^{iu} u^(-s) du, 8-term parts series
    flat = v ** (-g) / g
    if mode == "cos":
        return osc.real - flat
    return osc - flat


@lru_cache(maxsize=512)
def _panel_table(mode: str, g_key: float):
    """Cumulative integral from U_TAYLOR at fixed panel edges."""
    g = float(g_key)
    n_log = int(8 * math.log10(2.0 * np.pi / U_TAYLOR)) + 1
    log_edges = np.geomspace(U_TAYLOR, 2.0 * np.pi, n_log)
    n_lin = int(math.ceil((U_ASYMPTOTIC - 2.0 * np.pi) / (np.pi / 2.0)))
    lin_edges = np.linspace(2.0 * np.pi, U_ASYMPTOTIC, n_lin + 1)
    edges = np.concatenate([log_edges[:-1], lin_edges])
    a, b = edges[:-1, None], edges[1:, None]
    u = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X[None, :]
    wgt = 0.5 * (b - a) * _GL_W[None, :]
    panel = np.sum(_f_kernel(mode, u) * u ** (-g - 1.0) * wgt, axis=1)
    cum = np.concatenate([[0.0 + 0.0j], np.cumsum(panel)])
    return edges, cum


def _table_eval(mode: str, g: float, v: np.ndarray) -> np.ndarray:
    """int from U_TAYLOR to v for v in [U_TAYLOR, U_ASYMPTOTIC], vectorized."""
    edges, cum = _panel_table(mode, round(g, 12))
    idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, edges.size - 2)
    lo = edges[idx]
    u = 0.5 * (lo + v)[..., None] + 0.5 * (v - lo)[..., None] * _GL_X
    wgt = 0.5 * (v - lo)[..., None] * _GL_W
    partial = np.sum(_f_kernel(mode, u) * u ** (-g - 1.0) * wgt, axis=-1)
    return cum[idx] + partial


def _full_tail(mode: str, g: float) -> complex:
    """int from U_TAYLOR to infinity (cos/exp0 only)."""
    _, cum = _panel_table(mode, round(g, 12))
    t0 = _asymptotic_tail(mode, g, np.array([U_ASYMPTOTIC]))[0]
    return cum[-1] + t0


def _cumulative_rel(mode: str, g: float, v: np.ndarray) -> np.ndarray:
    """int from U_TAYLOR to v, any v > 0, any g > 0 (cos/exp0)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape, dtype=complex)
    low = v < U_TAYLOR
    mid = (v >= U_TAYLOR) & (v <= U_ASYMPTOTIC)
    high = v > U_ASYMPTOTIC
    if np.any(low):
        out[low] = -_taylor_between(mode, g, v[low])
    if np.any(mid):
        out[mid] = _table_eval(mode, g, v[mid])
    if np.any(high):
        full = _full_tail(mode, g)
        out[high] = full - _asymptotic_tail(mode, g, v[high])
    return out


def _exp1_from_zero(g: float, v: np.ndarray) -> np.ndarray:
    """int_0^v (e^{iu}-1-iu) u^(-g-1) du, needs g < 2; any v > 0."""
    if not g < 2.0:
        raise NumericalError("compensated kernel integral from zero needs exponent < 2")
    v = np.asarray(v, dtype=float)
    small = np.minimum(v, U_TAYLOR)
    out = np.zeros(v.shape, dtype=complex)
    for c, n in _series_terms("exp0")[1:]:  # the n=1 term is exactly cancelled
        out = out + c * small ** (n - g) / (n - g)
    big = v > U_TAYLOR
    if np.any(big):
        vb = v[big]
        out[big] = out[big] + _cumulative_rel("exp0", g, vb) - 1j * _power_int(
            1.0 - g, U_TAYLOR, vb
        )
    return out


def _piece_integral(mode: str, g: float, ua, ub) -> np.ndarray:
    """int_{ua}^{ub} f u^(-g-1) du with ua = 0 and ub = inf handled analytically.

    Mode exp1 (the -iu compensated kernel) is assembled from exp0 plus the
    closed-form first-moment piece except at the zero endpoint, where only
    the jointly compensated series converges.
    """
    ua = np.asarray(ua, dtype=float)
    ub_is_inf = np.isscalar(ub) and np.isinf(ub)
    from_zero = bool(np.all(ua == 0.0))
    if mode in ("cos", "exp0"):
        if ub_is_inf:
            return _full_tail(mode, g) - _cumulative_rel(mode, g, ua)
        ub = np.asarray(ub, dtype=float)
        if from_zero:
            head = _taylor_from_zero(mode, g, np.minimum(ub, U_TAYLOR))
            rest = np.where(
                ub > U_TAYLOR,
                _cumulative_rel(mode, g, np.maximum(ub, U_TAYLOR)),
                0.0,
            )
            return head + rest
        return _cumulative_rel(mode, g, ub) - _cumulative_rel(mode, g, ua)
    if mode == "exp1":
        if from_zero:
            if ub_is_inf:
                if not 1.0 < g < 2.0:
                    raise NumericalError(
                        "compensated kernel over (0, inf) needs exponent in (1, 2)"
                    )
                head = _exp1_from_zero(g, np.array([U_ASYMPTOTIC]))[0]
                tail = _asymptotic_tail("exp0", g, np.array([U_ASYMPTOTIC]))[0]
                # the -iu part over (U_ASYMPTOTIC, inf) integrates to -i V^{1-g}/(g-1)
                comp = -1j * U_ASYMPTOTIC ** (1.0 - g) / (g - 1.0)
                return np.full(ua.shape, head + tail + comp, dtype=complex)
            return _exp1_from_zero(g, ub)
        if ub_is_inf:
            if not g > 1.0:
                raise NumericalError("compensated tail to infinity needs exponent > 1")
            base = _full_tail("exp0", g) - _cumulative_rel("exp0", g, ua)
            return base + 1j * ua ** (1.0 - g) / (1.0 - g)
        ub = np.asarray(ub, dtype=float)
        base = _cumulative_rel("exp0", g, ub) - _cumulative_rel("exp0", g, ua)
        return base - 1j * _power_int(1.0 - g, ua, ub)
    raise ConfigError(f"unknown kernel mode {mode!r}")


def _closed_form_total(mode: str, g: float) -> complex:
    """int_0^inf f u^(-g-1) du for a pure power ray."""
    if mode == "cos":
        if not 0.0 < g < 2.0:
            raise NumericalError("symmetric closed form needs exponent in (0,2)")
        x = 1.0 - g  # Gamma(1-g) cos(pi g/2)/g, written to stay finite at g = 1
        return complex(-_gamma(1.0 + x) * (np.pi / 2.0) * np.sinc(x / 2.0) / g)
    if mode == "exp0":
        if not 0.0 < g < 1.0:
            raise NumericalError("one-sided closed form needs exponent in (0,1)")
    elif mode == "exp1":
        if not 1.0 < g < 2.0:
            raise NumericalError("compensated closed form needs exponent in (1,2)")
    else:
        raise ConfigError(f"unknown kernel mode {mode!r}")
    return complex(-(_gamma(1.0 - g) / g) * np.exp(-1j * np.pi * g / 2.0))


def _ray_psi(curve, theta: np.ndarray, mode: str, r_max: float = math.inf) -> np.ndarray:
    """One ray's exponent contribution at angular frequencies theta = 2 pi xi.z."""
    at = np.abs(theta)
    pos = at > 0.0
    out = np.zeros(theta.shape, dtype=complex)
    if not np.any(pos):
        return out
    atp = at[pos]
    pure = (
        r_max == math.inf
        and len(curve.knots) == 1
        and curve.slope_left == curve.slope_right
    )
    if pure:
        g = -curve.slope_left
        coeff = curve.values[0] * curve.knots[0] ** g
        acc = (coeff * g * _closed_form_total(mode, g)) * atp ** g
    else:
        acc = np.zeros(atp.shape, dtype=complex)
        for a, b, anchor_r, anchor_v, e in curve.pieces():
            g = -e
            if g <= 1e-15:
                continue  # flat stretch of the tail carries no mass
            b_eff = min(b, r_max)
            if not a < b_eff:
                continue
            coeff = anchor_v * anchor_r ** g  # tail = coeff * r^-g on the piece
            ua = atp * a
            ub = math.inf if b_eff == math.inf else atp * b_eff
            acc = acc + (coeff * g) * atp ** g * _piece_integral(mode, g, ua, ub)
    if mode != "cos":
        acc = np.where(theta[pos] < 0.0, np.conj(acc), acc)
    out[pos] = acc
    return out


def _measure_mode(spec: LevyMeasureSpec) -> str:
    """Kernel choice: symmetry kills Im, otherwise the order sets the compensator."""
    if spec.is_symmetric:
        return "cos"
    return "exp0" if spec.order_sigma < 1.0 else "exp1"


def symbol_at(spec: LevyMeasureSpec, points, r_max: float = math.inf) -> np.ndarray:
    """Characteristic exponent at arbitrary frequency points, shape (..., d)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0 or pts.shape[-1] != spec.dim:
        raise ConfigError("frequency points must have trailing dimension matching the measure")
    mode = _measure_mode(spec)
    out = np.zeros(pts.shape[:-1], dtype=complex)
    for ray in spec.rays:
        theta = 2.0 * np.pi * np.tensordot(pts, ray.z, axes=([-1], [0]))
        out = out + _ray_psi(ray.tail, np.asarray(theta, dtype=float), mode, r_max)
    if mode == "cos":
        out = out.real.astype(complex)
    return out


@dataclass(frozen=True)
class SymbolField:
    """A Fourier multiplier sampled on a frequency lattice."""

    grid: FrequencyGrid
    values: np.ndarray
    kind: str
    sigma: float | None = None
    measure_key: str = ""
    symmetric: bool = False

    def __post_init__(self):
        if self.kind not in ("full", "truncated", "fractional", "bessel"):
            raise ConfigError(f"unknown symbol kind {self.kind!r}")
        if self.values.shape != self.grid.shape:
            raise ConfigError("symbol values do not match the grid shape")
        if not np.all(np.isfinite(self.values)):
            flat = int(np.argmax(~np.isfinite(self.values.ravel())))
            idx = np.unravel_index(flat, self.values.shape)
            r = float(self.grid.freq_radius[idx])
            raise NumericalError(
                f"symbol evaluation did not converge at lattice node {tuple(map(int, idx))}"
                f" (|xi| = {r:.6g})"
            )
        if self.kind in ("full", "truncated"):
            scale = float(np.max(np.abs(self.values))) or 1.0
            zero = self.values[(0,) * self.grid.dim]
            if abs(zero) > 1e-12 * scale:
                raise NumericalError(f"symbol must vanish at frequency zero, got {zero}")
            if float(np.max(self.values.real)) > 1e-12 * scale:
                raise NumericalError("symbol real part must be nonpositive")

    def hermitian_defect(self) -> float:
        """max |psi(-xi) - conj(psi(xi))| over nodes whose negation is on the lattice.

        The Nyquist planes (index M/2) reflect onto themselves, so they are
        excluded: -xi falls off the lattice there.
        """
        diff = np.abs(self.grid.reflect(self.values) - np.conj(self.values))
        keep = np.ones(self.grid.size, dtype=bool)
        keep[self.grid.size // 2] = False
        for axis in range(self.grid.dim):
            shape = [1] * self.grid.dim
            shape[axis] = self.grid.size
            diff = diff * keep.reshape(shape)
        return float(np.max(diff))

    def imag_max(self) -> float:
        return float(np.max(np.abs(self.values.imag)))

    def save(self, path_base):
        from . import persist

        return persist.save_array(
            path_base,
            self.values,
            {
                "dim": self.grid.dim,
                "M": self.grid.size,
                "extent": self.grid.extent,
                "kind": self.kind,
                "sigma": self.sigma,
                "measure_key": self.measure_key,
            },
        )


def _field_from_measure(spec: LevyMeasureSpec, grid: FrequencyGrid, kind: str,
                        r_max: float) -> SymbolField:
    mode = _measure_mode(spec)
    nodes = grid.freq_nodes()
    out = np.zeros(grid.shape, dtype=complex)
    for ray in spec.rays:
        theta = sum(2.0 * np.pi * nodes[c] * ray.z[c] for c in range(spec.dim))
        theta = np.ascontiguousarray(np.broadcast_to(theta, grid.shape), dtype=float)
        out = out + _ray_psi(ray.tail, theta, mode, r_max)
    if mode == "cos":
        out = out.real.astype(complex)
    return SymbolField(
        grid,
        out,
        kind,
        sigma=spec.order_sigma,
        measure_key=spec.content_key(),
        symmetric=spec.is_symmetric,
    )


def compute_symbol(spec: LevyMeasureSpec, grid: FrequencyGrid) -> SymbolField:
    """Characteristic exponent on the lattice, compensator chosen by the order."""
    return _field_from_measure(spec, grid, "full", math.inf)


def truncated_symbol(m: ScaledMeasure, grid: FrequencyGrid) -> SymbolField:
    """Exponent of the rescaled measure restricted to the unit ball."""
    return _field_from_measure(m.measure, grid, "truncated", 1.0)


def truncated_decay_fit(field: SymbolField, lo: float = 1.0, hi: float = 64.0) -> dict:
    """Fit -Re psi ~ c |xi|^kappa on a radial shell of the lattice."""
    if field.kind != "truncated":
        raise ConfigError("decay fit applies to truncated symbols")
    radius = field.grid.freq_radius
    mask = (radius >= lo) & (radius <= hi)
    if not np.any(mask):
        raise ConfigError("decay fit shell is empty on this grid")
    rr = radius[mask]
    vv = -field.values.real[mask]
    if np.any(vv <= 0.0):
        raise NumericalError("truncated symbol must be strictly dissipative on the shell")
    design = np.vstack([np.log(rr), np.ones_like(rr)]).T
    coef, _, _, _ = np.linalg.lstsq(design, np.log(vv), rcond=None)
    kappa = float(coef[0])
    c_floor = float(np.min(vv / rr ** kappa))
    return {
        "kappa": kappa,
        "c": c_floor,
        "c_fit": float(np.exp(coef[1])),
        "shell": [float(lo), float(hi)],
        "n_nodes": int(mask.sum()),
    }


def fractional_symbol(s: SymbolField, delta: float) -> SymbolField:
    """-(-psi)^delta for a real nonpositive input symbol; delta = 1 is the identity."""
    if not 0.0 < delta <= 1.0:
        raise ConfigError("fractional order must lie in (0, 1]")
    scale = float(np.max(np.abs(s.values))) or 1.0
    imag_max = s.imag_max()
    if imag_max > 1e-10 * scale:
        raise ConfigError(
            f"fractional power needs a real symbol (max imaginary part {imag_max:.3g});"
            " symmetrize the measure first"
        )
    if delta == 1.0:
        return s
    vals = -np.power(np.maximum(-s.values.real, 0.0), delta)
    return SymbolField(
        s.grid,
        vals.astype(complex),
        "fractional",
        sigma=s.sigma,
        measure_key=s.measure_key,
        symmetric=True,
    )


def bessel_symbol(s: SymbolField, order: float) -> SymbolField:
    """(1 - psi)^order; order zero gives the identity multiplier."""
    scale = float(np.max(np.abs(s.values))) or 1.0
    if float(np.max(s.values.real)) > 1e-10 * scale:
        raise ConfigError("bessel multiplier needs a dissipative symbol")
    vals = np.power(1.0 - s.values, order)
    return SymbolField(
        s.grid,
        vals.astype(complex),
        "bessel",
        sigma=s.sigma,
        measure_key=s.measure_key,
        symmetric=s.symmetric,
    )


# ---------------------------------------------------------------------------
# nondegeneracy and two-sided bounds


def _unit_directions(dim: int, n: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2.0 * np.pi * (np.arange(n) + 0.31) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    raise ConfigError("direction sampling is implemented for dim 1 and 2")


def _local_exponent(curve, r: float) -> float:
    for _, b, _, _, e in curve.pieces():
        if r <= b:
            return e
    return curve.slope_right


def nondegeneracy_report(spec: LevyMeasureSpec, R_grid=None, directions=None) -> dict:
    """Both routes to the quadratic nondegeneracy functional.

    Direct route: minimum over sampled (R, direction) of the second moment of
    the rescaled measure along the direction inside the unit ball.  Sufficient
    route: uniform angular spread of the per-radius direction shares together
    with the below-one stretch of both ratio functions.
    """
    if R_grid is None:
        R_grid = np.geomspace(1e-3, 1e3, 25)
    R_grid = np.asarray(R_grid, dtype=float)
    if R_grid.ndim != 1 or R_grid.size < 2 or np.any(R_grid <= 0):
        raise ConfigError("R grid must be a positive 1-d grid")
    span = math.log10(float(R_grid.max()) / float(R_grid.min()))
    if span < 6.0 - 1e-9:
        raise ConfigError(f"R grid must span at least 6 decades, got {span:.2f}")
    if directions is None:
        directions = _unit_directions(spec.dim, 32)
    directions = np.asarray(directions, dtype=float)

    samples = np.empty((R_grid.size, directions.shape[0]))
    for i, R in enumerate(R_grid):
        scaled = spec.rescaled(R)
        for j, xh in enumerate(directions):
            samples[i, j] = scaled.directional_second_moment(xh, 1.0)
    per_R = samples.min(axis=1)
    direct_min = float(samples.min())

    # angular spread of the per-radius ray shares, uniformly over radius
    r_probe = np.geomspace(float(R_grid.min()), float(R_grid.max()), 49)
    zs = np.stack([ray.z for ray in spec.rays])
    proj_sq = (directions @ zs.T) ** 2
    c0 = math.inf
    for r in r_probe:
        dens = np.array(
            [max(-_local_exponent(ray.tail, r), 0.0) * float(ray.tail(r)) for ray in spec.rays]
        )
        total = float(dens.sum())
        if total <= 0.0:
            continue
        c0 = min(c0, float(np.min(proj_sq @ (dens / total))))

    prof = TailProfile.from_measure(spec, np.geomspace(1e-4, 1e4, 33))
    r1, r2 = ratio_functions(prof)
    s_grid = np.linspace(0.02, 0.98, 25)
    below1 = [float(np.mean(np.asarray(rf(s_grid)) < 1.0 - 1e-9)) for rf in (r1, r2)]

    return {
        "direct_min": direct_min,
        "direct_max": float(samples.max()),
        "per_R_spread": float(per_R.max() - per_R.min()),
        "R_range": [float(R_grid.min()), float(R_grid.max())],
        "n_directions": int(directions.shape[0]),
        "angular_spread_c0": c0,
        "ratio_below_one_fraction": below1,
        "sufficient_condition_holds": bool(c0 > 0.0 and min(below1) > 0.0),
    }


def nondegeneracy_B(spec: LevyMeasureSpec, R_grid=None, directions=None) -> float:
    """Sampled infimum of the directional quadratic functional."""
    return nondegeneracy_report(spec, R_grid, directions)["direct_min"]


def symbol_two_sided_bounds(spec: LevyMeasureSpec, w: TailProfile, xi_grid) -> dict:
    """Empirical constants squeezing -Re psi between multiples of 1/w(1/|xi|)."""
    xi = np.asarray(xi_grid, dtype=float)
    if xi.ndim != 1 or np.any(xi <= 0.0):
        raise ConfigError("bound sweep needs a 1-d grid of positive radii")
    dirs = _unit_directions(spec.dim, 8)
    gauge = np.asarray(w.w_at(1.0 / xi), dtype=float)
    ratios = []
    for xh in dirs:
        psi = symbol_at(spec, xi[:, None] * xh[None, :])
        ratios.append((-psi.real) * gauge)
    ratios = np.concatenate(ratios)
    c2 = float(ratios.min())
    C1 = float(ratios.max())
    return {
        "c_lower": c2,
        "C_upper": C1,
        "band": C1 / c2 if c2 > 0.0 else math.inf,
        "xi_range": [float(xi.min()), float(xi.max())],
        "n_points": int(ratios.size),
        "pass": bool(c2 > 0.0 and np.isfinite(C1)),
    }
