"""Empirical verification of the operator estimates behind the solver.

Each check evaluates one inequality on a sampled parameter set, reports
per-sample LHS and RHS together with the empirical constant sup(LHS/RHS),
and repeats itself on at least two refinement levels so the constant's
drift is part of the verdict.  Sup-claims over continuum parameters are
probed on log-spaced finite samples with a max <= 10x median heuristic;
Monte Carlo comparisons carry 3-standard-error bands.  Every check also
runs one deliberately inadmissible configuration through its own gates
and records that it was flagged.  A passing report means the numbers
found no counterexample at desk scale, nothing more.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .densities import fractional_generator, generator, kernel_difference_statistics
from .errors import ConfigError, NumericalError
from .lattice import FrequencyGrid
from .measures import (
    LevyMeasureSpec,
    TailProfile,
    moment_integrals,
    rescale,
    symmetrize,
    tail_function,
)
from .orv import estimate_indices, generalized_inverse
from .process import simulate_endpoints, simulate_poisson_measure
from .rng import stream
from .solver import InputData, MarkedForcing, mixed_mark_norm, solve, uniform_time_grid
from .spaces import MarkedFunction, NormSpec, besov_norm, bessel_norm, build_dyadic_system
from .symbols import compute_symbol, fractional_symbol, symbol_at

__all__ = [
    "EstimateReport",
    "hormander_check",
    "stochastic_hormander_check",
    "initial_estimate_check",
    "apriori_estimate_check",
    "fractional_representation_check",
    "standard_kernel_samples",
    "standard_initial_family",
    "standard_f_family",
]

_SUP_FACTOR = 10.0
_EPS_DRIFT = 0.10
_REFINE_DRIFT = 0.25
_MC_DRIFT = 0.10
_LATTICE_CAP = 1 << 18


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, float, np.integer, np.floating)):
        return repr(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))
    return str(v)


@dataclass(frozen=True)
class EstimateReport:
    """Outcome of one estimate check across its refinement levels."""

    estimate_id: str
    parameters: dict
    samples: tuple
    constant: float
    levels: tuple
    drift: float
    threshold: float
    passed: bool
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.levels) < 2:
            raise ConfigError("a report needs at least two refinement levels")
        rows = tuple(dict(r) for r in self.samples)
        for row in rows:
            lhs, rhs = float(row["lhs"]), float(row["rhs"])
            if not (np.isfinite(lhs) and np.isfinite(rhs) and lhs >= 0 and rhs >= 0):
                raise ConfigError("per-sample LHS and RHS must be finite and nonnegative")
        object.__setattr__(self, "samples", rows)
        object.__setattr__(self, "levels", tuple((str(a), float(b)) for a, b in self.levels))

    def to_dict(self) -> dict:
        return {
            "estimate_id": self.estimate_id,
            "parameters": self.parameters,
            "constant": self.constant,
            "levels": list(self.levels),
            "drift": self.drift,
            "threshold": self.threshold,
            "passed": self.passed,
            "samples": list(self.samples),
            "notes": self.notes,
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float))

    def to_csv(self, path):
        """One row per sample; columns are the union of the sample keys."""
        keys = sorted({k for row in self.samples for k in row})
        lines = [",".join(["estimate_id"] + keys)]
        for row in self.samples:
            cells = [self.estimate_id] + [_csv_cell(row.get(k, "")) for k in keys]
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n")


def _sup_and_median(ratios):
    arr = np.asarray(ratios, dtype=float)
    if arr.size == 0:
        raise NumericalError("no admissible samples produced a ratio")
    return float(np.max(arr)), float(np.median(arr))


def _relative_spread(values) -> float:
    arr = np.asarray(values, dtype=float)
    mean = float(np.mean(arr))
    if mean == 0.0:
        return 0.0
    return float((np.max(arr) - np.min(arr)) / mean)


def _gauge_match(spec: LevyMeasureSpec, w: TailProfile):
    r = np.geomspace(0.25, 4.0, 7)
    got = np.asarray(w.w_at(r), dtype=float) * np.asarray(spec.delta(r), dtype=float)
    if np.max(np.abs(got - 1.0)) > 1e-8:
        raise ConfigError(
            "gauge profile does not match the measure's tail "
            f"(max defect {np.max(np.abs(got - 1.0)):.3g}); wrong order or wrong measure"
        )


def _inverse_match(w: TailProfile, a):
    t = np.geomspace(0.1, 10.0, 5)
    back = np.asarray(w.w_at(a(t)), dtype=float)
    if np.max(np.abs(back / t - 1.0)) > 1e-6:
        raise ConfigError("the scale function does not invert the supplied gauge")


def _alpha_window(w: TailProfile, sigma: float) -> tuple:
    """Moment exponents inside the index window required by the kernel bounds."""
    idx = estimate_indices(w)
    cap = 1.0 if sigma < 1.0 else 2.0
    if not idx.q_max < cap:
        raise ConfigError(
            f"upper gauge index {idx.q_max:.3f} leaves no room below {cap:g}; "
            "the kernel estimates do not apply to this order"
        )
    alpha1 = 0.5 * (idx.q_max + cap)
    lo = 1.0 if 1.0 < sigma < 2.0 else 0.0
    if not lo < idx.p_min:
        raise ConfigError(
            f"lower gauge index {idx.p_min:.3f} leaves no admissible outer exponent"
        )
    alpha2 = 0.5 * (lo + idx.p_min)
    return float(alpha1), float(alpha2)


def _choose_c0(w: TailProfile, eta_lo: float, eta_hi: float) -> int:
    """Smallest integer dilation above 3 that triples the gauge on the range."""
    etas = np.geomspace(eta_lo / 4.0, eta_hi * 4.0, 49)
    base = np.asarray(w.w_at(etas), dtype=float)
    for c0 in range(4, 65):
        if np.all(np.asarray(w.w_at(c0 * etas), dtype=float) > 3.0 * base):
            return c0
    raise NumericalError("no dilation constant up to 64 triples the gauge everywhere")


def _moment_bound(pi: LevyMeasureSpec, alpha1: float, alpha2: float) -> float:
    """sup_R of the split moment integrals of the rescaled measure."""
    total = 0.0
    for R in np.geomspace(1e-2, 1e2, 17):
        inner, outer = moment_integrals(rescale(pi, R), alpha1, alpha2)
        total = max(total, inner + outer)
    return float(total)


# ---------------------------------------------------------------------------
# Hörmander-condition checks


def _kernel_grid(spec, a, eta, c0, t_floor, t_cap, op_mult_of, cache):
    """Per-sample lattice sized to the mask scale and the marched time range.

    The frequency extent doubles until the damped spectrum reaches e^-40
    at the earliest marched time; spacing and box round to powers of two
    so nearby samples share one cached grid, symbol, and multiplier.
    """
    xi = 1.0 / float(a(t_floor))
    while True:
        probe = np.zeros((1, spec.dim))
        probe[0, 0] = xi
        if -float(symbol_at(spec, probe)[0].real) * t_floor >= 40.0:
            break
        xi *= 2.0
        if xi > 1e12:
            raise NumericalError("no affordable frequency extent resolves the kernel floor time")
    h = 2.0 ** math.floor(math.log2(min(eta / 32.0, 1.0 / (2.0 * xi))))
    box = 2.0 ** math.ceil(math.log2(4.0 * max(float(a(t_cap)), c0 * eta)))
    size = max(int(round(2.0 * box / h)), 16)
    if size > _LATTICE_CAP:
        raise NumericalError(
            f"sample eta={eta:g} needs {size} lattice nodes (cap {_LATTICE_CAP}); "
            "shrink the sampled range"
        )
    key = (size, h)
    if key not in cache:
        grid = FrequencyGrid(spec.dim, size, 1.0 / (2.0 * h))
        sym_star = compute_symbol(spec.reflected(), grid)
        mult, delta = op_mult_of(grid)
        cache[key] = (grid, sym_star, mult, delta)
    return cache[key]


def _masked_l1(grid: FrequencyGrid, vals: np.ndarray, cutoff: float) -> float:
    mask = grid.space_radius > cutoff
    return float(np.sum(np.abs(vals[mask])) * grid.cell_volume)


def _shifted_difference(symbol, mult, t, s, y, eps, cutoff=None):
    """Integral of |K(t-s, x-y) - K(t, x)| over all x or over |x| > cutoff.

    K carries the chi_[eps, inf) time truncation; a kernel whose time
    argument falls below eps is identically zero.
    """
    grid = symbol.grid
    char = np.zeros(grid.shape, dtype=complex)
    alive = False
    if t - s >= eps:
        shift = np.conj(grid.shift_phase(np.atleast_1d(y)))
        char = char + shift * (mult * np.exp((t - s) * symbol.values))
        alive = True
    if t >= eps:
        char = char - mult * np.exp(t * symbol.values)
        alive = True
    if not alive:
        return 0.0
    vals = grid.density_from_char(char)
    if cutoff is None:
        return float(np.sum(np.abs(vals)) * grid.cell_volume)
    return _masked_l1(grid, vals, cutoff)


def _tail_smalltime(m_hat, a, alpha2, lo, hi, cutoff, delta, power):
    """Integrated x-tail bound m t^-delta (a(t)/c)^beta below the marched range."""
    if not lo < hi:
        return 0.0
    beta = alpha2 if power == 1 else 0.45 * alpha2
    ts = np.geomspace(max(lo, hi * 1e-9), hi, 17)
    vals = (2.0 * m_hat * ts ** (-delta) * (np.asarray(a(ts)) / cutoff) ** beta) ** power
    return float(np.trapezoid(vals * ts, np.log(ts)))


def _tail_largetime(ts, integrand):
    """Power-law extrapolation of the integrand beyond the marched range."""
    tail_ts, tail_vals = ts[-6:], integrand[-6:]
    if np.any(tail_vals <= 0.0):
        return 0.0
    slope = np.polyfit(np.log(tail_ts), np.log(tail_vals), 1)[0]
    gamma = max(-float(slope), 1.1)
    return float(tail_vals[-1] * tail_ts[-1] / (gamma - 1.0))


def _kernel_sample_integral(spec, w, a, sample, eps, c0, m_hat, alpha2, op_mult_of, power, cache):
    """One smoothness sample: quadrature of the masked/unmasked kernel difference."""
    s, y, eta = sample
    t_edge = float(w.w_at(c0 * eta))
    t_floor, t_cap = t_edge / 16.0, 32.0 * t_edge
    if s == 0.0 and y == 0.0:
        return {
            "s": 0.0, "y": 0.0, "eta": float(eta), "lhs": 0.0, "i_numeric": 0.0,
            "tail_small_t": 0.0, "tail_large_t": 0.0, "t_edge": t_edge,
            "grid_size": 0, "grid_extent": 0.0,
        }
    grid, sym, mult, delta = _kernel_grid(spec, a, eta, c0, t_floor, t_cap, op_mult_of, cache)
    cutoff = (c0 - 1.0) * eta

    nodes_b = np.geomspace(t_floor, t_edge, 13)[:-1]
    nodes_a = np.geomspace(t_edge, t_cap, 25)
    ts = np.concatenate([nodes_b, nodes_a])
    vals = np.empty(ts.size)
    for i, t in enumerate(ts):
        both = (t >= eps) and (t - s >= eps)
        if t >= t_edge and both:
            space, tdiff = kernel_difference_statistics(sym, _Mult(mult), t, s, y)
            vals[i] = space + tdiff
        elif t >= t_edge:
            vals[i] = _shifted_difference(sym, mult, t, s, y, eps)
        else:
            vals[i] = _shifted_difference(sym, mult, t, s, y, eps, cutoff=c0 * eta)
    integrand = vals ** power
    i_num = float(np.trapezoid(integrand, ts))
    lo_alive = min(eps, eps + s)
    tail_lo = _tail_smalltime(m_hat, a, alpha2, lo_alive, t_floor, cutoff, delta, power)
    tail_hi = _tail_largetime(ts, integrand)
    return {
        "s": float(s),
        "y": float(y),
        "eta": float(eta),
        "lhs": i_num + tail_lo + tail_hi,
        "i_numeric": i_num,
        "tail_small_t": tail_lo,
        "tail_large_t": tail_hi,
        "t_edge": t_edge,
        "grid_size": grid.size,
        "grid_extent": grid.extent,
    }


@dataclass(frozen=True)
class _Mult:
    """Array-backed operator wrapper for kernel_difference_statistics."""

    values: np.ndarray

    @property
    def label(self) -> str:
        return "fixed-multiplier"

    def multiplier(self, grid: FrequencyGrid) -> np.ndarray:
        if self.values.shape != grid.shape:
            raise ConfigError("multiplier was built on a different lattice")
        return self.values


def _validate_samples(w, samples):
    cleaned = []
    for i, (s, y, eta) in enumerate(samples):
        if not (np.isfinite(eta) and eta > 0):
            raise ConfigError(f"sample {i}: eta must be positive and finite")
        w_eta = float(w.w_at(eta))
        if abs(s) > w_eta * (1.0 + 1e-12):
            raise ConfigError(
                f"sample {i} rejected: |s|={abs(s):g} exceeds w(eta)={w_eta:g}"
            )
        if abs(float(np.linalg.norm(np.atleast_1d(y)))) > eta * (1.0 + 1e-12):
            raise ConfigError(f"sample {i} rejected: |y| exceeds eta={eta:g}")
        cleaned.append((float(s), float(np.atleast_1d(y)[0]), float(eta)))
    if not cleaned:
        raise ConfigError("at least one sample is required")
    return cleaned


def _negative_sample_canary(w):
    eta = 1.0
    bad = (2.0 * float(w.w_at(eta)), 0.0, eta)
    try:
        _validate_samples(w, [bad])
    except ConfigError as exc:
        return {"description": "sample with |s| = 2 w(eta)", "flagged": True, "message": str(exc)}
    return {"description": "sample with |s| = 2 w(eta)", "flagged": False}


def _kernel_check(estimate_id, spec, w, a, samples, epsilon, op_mult_of, rhs, power):
    _gauge_match(spec, w)
    _inverse_match(w, a)
    rows_in = _validate_samples(w, samples)
    alpha1, alpha2 = _alpha_window(w, spec.order_sigma)
    etas = [r[2] for r in rows_in]
    c0 = _choose_c0(w, min(etas), max(etas))
    m_hat = rhs["m_hat"]
    cache = {}

    def run(eps):
        rows = [
            _kernel_sample_integral(
                spec, w, a, smp, eps, c0, m_hat, alpha2, op_mult_of, power, cache
            )
            for smp in rows_in
        ]
        for row in rows:
            row["rhs"] = rhs["value"]
            row["ratio"] = row["lhs"] / rhs["value"]
            row["epsilon"] = eps
        return rows, _sup_and_median([r["ratio"] for r in rows])

    if not 0.0 < epsilon < math.inf:
        raise ConfigError("the censoring level epsilon must be positive and finite")
    eps_levels = (float(epsilon), float(epsilon) / 4.0, float(epsilon) / 16.0)
    by_eps = {eps: run(eps) for eps in eps_levels}
    rows_main = by_eps[eps_levels[0]][0]
    constant, median = by_eps[eps_levels[0]][1]
    sweep_constants = [by_eps[eps][1][0] for eps in eps_levels]
    drift = _relative_spread(sweep_constants)
    sup_ok = constant <= _SUP_FACTOR * median
    passed = sup_ok and drift < _EPS_DRIFT
    return EstimateReport(
        estimate_id=estimate_id,
        parameters={
            "alpha1": alpha1,
            "alpha2": alpha2,
            "C0": c0,
            "moment_bound": m_hat,
            "epsilon": float(epsilon),
            "eps_levels": list(eps_levels),
            "n_samples": len(rows_in),
            "eta_range": [min(etas), max(etas)],
        },
        samples=tuple(rows_main),
        constant=constant,
        levels=tuple((f"eps={eps:g}", by_eps[eps][1][0]) for eps in eps_levels),
        drift=drift,
        threshold=_EPS_DRIFT,
        passed=passed,
        notes={
            "median_ratio": median,
            "sup_within_10x_median": sup_ok,
            "eta_decades": math.log10(max(etas) / min(etas)) if min(etas) > 0 else 0.0,
            "large_time_tail_fraction": max(
                (r["tail_large_t"] / r["lhs"] for r in rows_main if r["lhs"] > 0),
                default=0.0,
            ),
            "negative_control": _negative_sample_canary(w),
        },
    )


def hormander_check(spec, w, a, samples, epsilon=1e-3) -> EstimateReport:
    """Smoothness statistic of the damped generator kernel over shifted boxes.

    For each admissible sample (s, y, eta) the double integral of
    |K(t-s, x-y) - K(t, x)| outside the dilated box is approximated via
    kernel_difference_statistics over a marched time range; below the
    marched floor the x-tail moment bound integrates the remainder, above
    it a fitted power law does.  The reported RHS is the sup of the split
    moment integrals of the rescaled measure.
    """
    alpha1, alpha2 = _alpha_window(w, spec.order_sigma)
    m_hat = _moment_bound(spec, alpha1, alpha2)

    def op_mult_of(grid):
        return generator(spec).multiplier(grid), 1.0

    return _kernel_check(
        "hormander", spec, w, a, samples, epsilon, op_mult_of,
        {"m_hat": m_hat, "value": m_hat}, power=1,
    )


def stochastic_hormander_check(spec, w, a, samples, epsilon=1e-3) -> EstimateReport:
    """Square-integrated version with the half-order fractional kernel."""
    alpha1, alpha2 = _alpha_window(w, spec.order_sigma)
    m_hat = _moment_bound(symmetrize(spec), alpha1, alpha2)

    def op_mult_of(grid):
        return fractional_generator(spec, 0.5).multiplier(grid), 0.5

    return _kernel_check(
        "stochastic-hormander", spec, w, a, samples, epsilon, op_mult_of,
        {"m_hat": m_hat, "value": m_hat ** 2}, power=2,
    )


def standard_kernel_samples(w, n=50, eta_lo=1e-2, eta_hi=1e2, seed=23):
    """Admissible (s, y, eta) triples across log-spaced eta."""
    gen = stream(seed, "hormander-samples")
    etas = np.geomspace(eta_lo, eta_hi, n)
    out = []
    for eta in etas:
        u, v = gen.uniform(-0.9, 0.9, size=2)
        out.append((float(u * w.w_at(eta)), float(v * eta), float(eta)))
    return out


# ---------------------------------------------------------------------------
# initial-value estimate


def standard_initial_family(n=12):
    """Band-limited test functions: bumps, modulated bumps, cosine packs.

    Every member is defined pointwise off the lattice, so refining the
    lattice re-evaluates the same function instead of redrawing it.
    """

    def gauss(width):
        return lambda grid: np.exp(-(grid.space_axis() / width) ** 2 / 2.0)

    def modulated(width, k):
        return lambda grid: (
            np.exp(-(grid.space_axis() / width) ** 2 / 2.0)
            * np.cos(2.0 * np.pi * k * grid.space_axis())
        )

    def cosine_pack(j, seed):
        gen = stream(seed, "initial-family", j)
        freqs = 2.0 ** j * gen.uniform(0.7, 1.3, size=24)
        phases = gen.uniform(0.0, 2.0 * np.pi, size=24)
        amps = gen.uniform(0.5, 1.0, size=24)
        amps = amps / amps.sum()

        def build(grid):
            x = grid.space_axis()
            return (amps[:, None] * np.cos(2.0 * np.pi * freqs[:, None] * x[None, :]
                                           + phases[:, None])).sum(axis=0)

        return build

    family = [
        ("gauss_w0.3", gauss(0.3)),
        ("gauss_w1", gauss(1.0)),
        ("gauss_w3", gauss(3.0)),
        ("mod_w1_k1", modulated(1.0, 1.0)),
        ("mod_w1_k3", modulated(1.0, 3.0)),
        ("mod_w2_k2", modulated(2.0, 2.0)),
        ("pack_j0", cosine_pack(0, 101)),
        ("pack_j1", cosine_pack(1, 102)),
        ("pack_j2", cosine_pack(2, 103)),
        ("pack_j2b", cosine_pack(2, 104)),
        ("mix_bump_pack", lambda grid: gauss(1.0)(grid) + 0.5 * cosine_pack(2, 105)(grid)),
        ("offset_bump", lambda grid: np.exp(-((grid.space_axis() - 2.0)) ** 2)),
    ]
    return family[:n]


def _initial_lhs(symbol, g, lam, p, horizon):
    """Space-time norm of the generator applied along the damped flow."""
    grid = symbol.grid
    ts = np.concatenate([[0.0], np.geomspace(1e-3 * horizon, horizon, 48)])
    ghat = np.fft.fftn(np.asarray(g, dtype=float))
    powers = np.empty(ts.size)
    for i, t in enumerate(ts):
        mult = symbol.values * np.exp(t * (symbol.values - lam))
        field = np.fft.ifftn(mult * ghat).real
        powers[i] = grid.lp_norm(field, p) ** p
    return float(np.trapezoid(powers, ts)) ** (1.0 / p)


def _block_decay_notes(symbol, sys, w, lam):
    """Exponential decay of the block-localized flow kernels (base-2 only)."""
    rows = []
    for j in (2, 3):
        if j + 1 > sys.j_cap:
            continue
        w_j = float(w.w_at(float(sys.base) ** (-j)))
        fat = sys.fattened(j)
        t_nodes = w_j * np.array([0.5, 1.0, 2.0, 4.0])
        l1 = []
        for t in t_nodes:
            mult = w_j * symbol.values * np.exp(t * (symbol.values - lam)) * fat
            vals = symbol.grid.density_from_char(mult)
            l1.append(float(np.sum(np.abs(vals)) * symbol.grid.cell_volume))
        rate = float(np.polyfit(t_nodes, np.log(np.maximum(l1, 1e-300)), 1)[0])
        rows.append({"j": j, "rate_times_w": rate * w_j, "l1_at_nodes": l1})
    return rows


def initial_estimate_check(spec, w, sys, family=None, lam=1.0,
                           p_values=(2.0, 4.0), horizon=4.0) -> EstimateReport:
    """Generator-along-the-flow norm against the matching block-sum norm.

    The empirical constant is the sup of LHS/RHS over the family and both
    integrability exponents; levels re-run it on the half family and on a
    lattice with halved spacing, and the verdict gates the lattice drift.
    """
    _gauge_match(spec, w)
    if not 0.0 <= lam < math.inf:
        raise ConfigError("damping lambda must be nonnegative and finite")
    family = standard_initial_family() if family is None else list(family)
    if not family:
        raise ConfigError("the test family must be nonempty")

    def run(system, members, level):
        symbol = compute_symbol(spec, system.grid)
        rows = []
        for label, build in members:
            g = np.asarray(build(system.grid), dtype=float)
            for p in p_values:
                lhs = _initial_lhs(symbol, g, lam, p, horizon)
                rhs = besov_norm(g, system, NormSpec(1.0 - 1.0 / p, p, w))
                if rhs == 0.0 and lhs <= 1e-12:
                    ratio = 0.0
                else:
                    ratio = lhs / rhs
                rows.append({
                    "label": label, "p": p, "level": level,
                    "lhs": lhs, "rhs": rhs, "ratio": ratio,
                })
        return rows, max(r["ratio"] for r in rows)

    half = family[: max(len(family) // 2, 1)]
    rows_half, c_half = run(sys, half, "half-family")
    rows_base, c_base = run(sys, family, "base")
    fine_grid = FrequencyGrid(sys.grid.dim, sys.grid.size * 2, sys.grid.extent * 2)
    sys_fine = build_dyadic_system(sys.base, fine_grid)
    rows_fine, c_fine = run(sys_fine, family, "refined-lattice")

    drift = abs(c_fine - c_base) / c_base
    enrichment = (c_base - c_half) / c_half if c_half > 0 else 0.0
    passed = drift < _REFINE_DRIFT
    symbol = compute_symbol(spec, sys.grid)
    notes = {
        "enrichment_growth": enrichment,
        "negative_control": _mismatched_gauge_canary(spec, w),
    }
    if sys.base == 2:
        notes["block_kernel_decay"] = _block_decay_notes(symbol, sys, w, lam)
    return EstimateReport(
        estimate_id="initial-estimate",
        parameters={
            "lambda": lam, "p_values": list(p_values), "horizon": horizon,
            "family_size": len(family), "grid_size": sys.grid.size,
            "grid_extent": sys.grid.extent, "base": sys.base,
        },
        samples=tuple(rows_half + rows_base + rows_fine),
        constant=c_base,
        levels=(("half-family", c_half), ("base", c_base), ("refined-lattice", c_fine)),
        drift=drift,
        threshold=_REFINE_DRIFT,
        passed=passed,
        notes=notes,
    )


def _mismatched_gauge_canary(spec, w):
    squared = TailProfile.from_w_function(
        lambda r: np.asarray(w.w_at(r), dtype=float) ** 2, w.grid
    )
    try:
        _gauge_match(spec, squared)
    except ConfigError as exc:
        return {"description": "gauge replaced by its square", "flagged": True,
                "message": str(exc)}
    return {"description": "gauge replaced by its square", "flagged": False}


# ---------------------------------------------------------------------------
# a priori estimate


def _band_limited_draw(gen, sys, decay=0.6):
    """Seeded noise filtered to blocks whose neighbors stay resolved."""
    j_hi = max(sys.j_max - 1, 1)
    hat = np.fft.fftn(gen.standard_normal(sys.grid.shape))
    combined = np.zeros(sys.grid.shape)
    for j in range(j_hi + 1):
        combined += decay ** j * sys.blocks[j]
    vals = np.fft.ifftn(combined * hat).real
    norm = sys.grid.lp_norm(vals, 2.0)
    return vals / norm if norm > 0 else vals


def _draw_inputs(sys, seed, replica, components, marks, times):
    gen = stream(seed, "apriori-inputs", replica)
    grid = sys.grid
    tcol = (-1,) + (1,) * grid.dim
    g = _band_limited_draw(gen, sys) if "g" in components else None
    f = None
    if "f" in components:
        f1, f2 = _band_limited_draw(gen, sys), _band_limited_draw(gen, sys)
        f = (np.cos(2.0 * times).reshape(tcol) * f1[None]
             + 0.5 * np.sin(3.0 * times).reshape(tcol) * f2[None])
    Phi = None
    if "Phi" in components:
        profiles = [1.0 + 0.0 * times, 1.0 + 0.5 * times, np.cos(times)]
        vals = np.zeros((times.size, marks) + grid.shape)
        for m in range(marks):
            base = _band_limited_draw(gen, sys)
            vals[:, m] = profiles[m % 3].reshape(tcol) * base[None]
        weights = tuple(float(x) for x in (1.2, 0.8, 0.5, 0.4, 0.3, 0.25, 0.2, 0.15)[:marks])
        names = tuple(f"m{i}" for i in range(marks))
        Phi = MarkedForcing(grid, names, weights, vals)
    return g, f, Phi


def _time_lp(values_per_node, times, p):
    arr = np.asarray(values_per_node, dtype=float)
    return float(np.trapezoid(arr ** p, times)) ** (1.0 / p)


def apriori_estimate_check(spec, w, sys, ensembles=None, p_values=(2.0, 4.0, 1.5),
                           lam_values=(0.1, 1.0, 10.0), horizon=1.0) -> EstimateReport:
    """Both bounds of the main well-posedness estimate on seeded ensembles.

    Per replica the inputs are drawn once; the solution runs over a small
    bundle of driving jump paths and the path average estimates the
    p-th-moment norms.  Rows tagged "generator" gate the smoothness bound,
    rows tagged "solution" the damping-weighted bound; exponents below 2
    drop the square-function term on both sides.
    """
    _gauge_match(spec, w)
    conf = {"seed": 17, "replicas": 6, "paths": 12, "components": ("g", "f", "Phi"),
            "marks": 3, "n_times": 33}
    conf.update(ensembles or {})
    if conf["marks"] > 8:
        raise ConfigError("at most 8 marks are supported")
    if not set(conf["components"]) <= {"g", "f", "Phi"}:
        raise ConfigError("ensemble components must be among g, f, Phi")
    for lam in lam_values:
        if not lam > 0:
            raise ConfigError("damping values must be positive")
    grid = sys.grid
    symbol = compute_symbol(spec, grid)
    times = uniform_time_grid(horizon, conf["n_times"])
    stochastic = "Phi" in conf["components"]
    n_paths = conf["paths"] if stochastic else 1

    rows = []
    for replica in range(conf["replicas"]):
        g, f, Phi = _draw_inputs(sys, conf["seed"], replica, conf["components"],
                                 conf["marks"], times)
        zero = np.zeros(grid.shape)
        g_eff = g if g is not None else zero
        solves = {}
        for lam in lam_values:
            inp = InputData(g=g, f=f, Phi=Phi, lam=float(lam), T=horizon)
            per_path = []
            for path in range(n_paths):
                jumps = None
                if stochastic:
                    jumps = simulate_poisson_measure(
                        dict(zip(Phi.marks, Phi.weights)), horizon,
                        conf["seed"] * 1009 + replica * 101 + path,
                    )
                sol = solve(symbol, inp, jumps, times)
                lu = np.stack([
                    np.fft.ifftn(symbol.values * np.fft.fftn(u)).real for u in sol.values
                ])
                per_path.append((sol.values, lu))
            solves[lam] = per_path

        for p in p_values:
            sp = 1.0 - 1.0 / p
            rhs_parts = {
                "f": _time_lp([grid.lp_norm(s, p) for s in f], times, p) if f is not None else 0.0,
                "g_besov": besov_norm(g_eff, sys, NormSpec(sp, p, w)),
                "g_lp": grid.lp_norm(g_eff, p),
            }
            if Phi is not None:
                besov_spec = NormSpec(sp, p, w, q=p, r=p)
                rhs_parts["phi_besov"] = _time_lp(
                    [besov_norm(MarkedFunction(grid, Phi.values[k], Phi.weights), sys, besov_spec)
                     for k in range(times.size)], times, p)
                rhs_parts["phi_pp"] = _time_lp(
                    [mixed_mark_norm(Phi.values[k], Phi.weights, grid, p, p)
                     for k in range(times.size)], times, p)
                if p >= 2.0:
                    half_spec = NormSpec(0.5, p, w, r=2.0)
                    rhs_parts["phi_sq"] = _time_lp(
                        [bessel_norm(MarkedFunction(grid, Phi.values[k], Phi.weights), sys, half_spec)
                         for k in range(times.size)], times, p)
                    rhs_parts["phi_2p"] = _time_lp(
                        [mixed_mark_norm(Phi.values[k], Phi.weights, grid, 2.0, p)
                         for k in range(times.size)], times, p)
            for lam in lam_values:
                rho = min(1.0 / lam, horizon)
                lhs_l = np.mean([
                    _time_lp([grid.lp_norm(s, p) for s in lu], times, p) ** p
                    for _, lu in solves[lam]
                ]) ** (1.0 / p)
                lhs_u = np.mean([
                    _time_lp([grid.lp_norm(s, p) for s in uv], times, p) ** p
                    for uv, _ in solves[lam]
                ]) ** (1.0 / p)
                rhs_l = rhs_parts["f"] + rhs_parts["g_besov"] + rhs_parts.get("phi_besov", 0.0)
                rhs_u = (rho * rhs_parts["f"] + rho ** (1.0 / p) * rhs_parts["g_lp"]
                         + rho ** (1.0 / p) * rhs_parts.get("phi_pp", 0.0))
                if p >= 2.0 and Phi is not None:
                    rhs_l += rhs_parts["phi_sq"]
                    rhs_u += rho ** 0.5 * rhs_parts["phi_2p"]
                for kind, lhs, rhs in (("generator", lhs_l, rhs_l), ("solution", lhs_u, rhs_u)):
                    rows.append({
                        "kind": kind, "p": p, "lam": lam, "replica": replica,
                        "rho": rho, "lhs": float(lhs), "rhs": float(rhs),
                        "ratio": float(lhs / rhs) if rhs > 0 else 0.0,
                    })

    def sup_over(rows_subset):
        return max(r["ratio"] for r in rows_subset)

    gen_rows = [r for r in rows if r["kind"] == "generator"]
    half_cut = conf["replicas"] // 2
    c_half = sup_over([r for r in gen_rows if r["replica"] < half_cut])
    c_full = sup_over(gen_rows)
    drift = abs(c_full - c_half) / c_full
    sol_rows = [r for r in rows if r["kind"] == "solution"]
    c_sol = sup_over(sol_rows)
    sol_drift = abs(c_sol - sup_over([r for r in sol_rows if r["replica"] < half_cut])) / c_sol
    passed = drift < _REFINE_DRIFT and sol_drift < _REFINE_DRIFT

    canary = {"description": "ensemble with 9 marks", "flagged": False}
    try:
        apriori_estimate_check(spec, w, sys, ensembles={"marks": 9})
    except ConfigError as exc:
        canary = {"description": "ensemble with 9 marks", "flagged": True, "message": str(exc)}

    return EstimateReport(
        estimate_id="apriori-estimate",
        parameters={"p_values": list(p_values), "lam_values": list(lam_values),
                    "horizon": horizon, **{k: (list(v) if isinstance(v, tuple) else v)
                                           for k, v in conf.items()}},
        samples=tuple(rows),
        constant=c_full,
        levels=(("replicas-half", c_half), ("replicas-full", c_full)),
        drift=drift,
        threshold=_REFINE_DRIFT,
        passed=passed,
        notes={"solution_bound_constant": c_sol, "solution_bound_drift": sol_drift,
               "negative_control": canary},
    )


# ---------------------------------------------------------------------------
# fractional representation


def standard_f_family():
    return [
        ("gauss", lambda grid: np.exp(-grid.space_axis() ** 2 / 2.0)),
        ("bump_shift", lambda grid: np.exp(-((grid.space_axis() - 1.0)) ** 2)),
        ("wide_mod", lambda grid: np.exp(-(grid.space_axis() / 2.5) ** 2 / 2.0)
         * np.cos(np.pi * grid.space_axis() / 4.0)),
    ]


def _periodic_eval(grid: FrequencyGrid, values: np.ndarray, queries: np.ndarray) -> np.ndarray:
    x = grid.space_axis()
    order = np.argsort(x)
    xp, fp = x[order], np.asarray(values)[order]
    period = grid.size * grid.spacing
    q = np.mod(queries - xp[0], period) + xp[0]
    xp_ext = np.append(xp, xp[0] + period)
    fp_ext = np.append(fp, fp[0])
    return np.interp(q, xp_ext, fp_ext)


def fractional_representation_check(spec, delta=(0.25, 0.5, 0.75), f_family=None,
                                    n_paths=10_000, seed=29, grid=None) -> EstimateReport:
    """Monte Carlo route of the fractional power against its multiplier route.

    The time integral splits at 1: below, the flow form weights the full
    generator along the path; above, the plain difference form runs to a
    truncation whose static part is integrated exactly.  One constant is
    calibrated per order on the first family member and held fixed.
    """
    deltas = tuple(float(d) for d in np.atleast_1d(delta))
    for d in deltas:
        if not 0.0 < d < 1.0:
            raise ConfigError("fractional orders must lie strictly inside (0, 1)")
    family = standard_f_family() if f_family is None else list(f_family)
    if not family:
        raise ConfigError("the function family must be nonempty")
    grid = grid if grid is not None else FrequencyGrid(1, 512, 16.0)
    if grid.dim != 1:
        raise ConfigError("the path comparison is implemented for dimension 1")
    mu = symmetrize(spec)
    symbol = compute_symbol(mu, grid)
    w = tail_function(mu, np.geomspace(1e-4, 1e4, 161))
    a = generalized_inverse(w)
    n_batches = 16
    n_paths = (n_paths // n_batches) * n_batches
    if n_paths < n_batches:
        raise ConfigError("at least 16 paths are required")

    r_nodes = np.geomspace(1e-3, 1.0, 19)
    t_nodes = np.geomspace(1.0, 64.0, 13)
    x = grid.space_axis()
    fields = {}
    for label, build in list(family) + [("__const__", lambda g: np.ones(g.shape))]:
        f_vals = np.asarray(build(grid), dtype=float)
        lf_vals = np.fft.ifftn(symbol.values * np.fft.fftn(f_vals)).real
        fields[label] = {"f": f_vals, "lf": lf_vals}

    def batch_means(t, node_id, target_key):
        eps = float(a(t)) / 128.0
        ends, _ = simulate_endpoints(mu, float(t), eps, n_paths,
                                     seed * 10_000 + node_id, brownian_proxy=True)
        z = ends.reshape(n_batches, n_paths // n_batches, 1)
        out = {}
        for label in fields:
            vals = fields[label][target_key]
            means = np.empty((n_batches, grid.size))
            for b in range(n_batches):
                q = x[None, :] + z[b]
                means[b] = np.mean(_periodic_eval(grid, vals, q), axis=0)
            out[label] = means
        return out

    flow_means = {i: batch_means(r, i, "lf") for i, r in enumerate(r_nodes)}
    diff_means = {i: batch_means(t, 100 + i, "f") for i, t in enumerate(t_nodes)}

    def mc_raw(label, d, batch_slice):
        lf, f_vals = fields[label]["lf"], fields[label]["f"]
        flow = np.stack([np.mean(flow_means[i][label][batch_slice], axis=0)
                         for i in range(r_nodes.size)])
        wt = (r_nodes ** (-d) - 1.0) / d
        part1 = np.trapezoid(flow * wt[:, None], r_nodes, axis=0)
        rm = r_nodes[0]
        part1 += lf * (rm ** (1.0 - d) / (1.0 - d) - rm) / d
        diff = np.stack([np.mean(diff_means[i][label][batch_slice], axis=0) - f_vals
                         for i in range(t_nodes.size)])
        part2 = np.trapezoid(diff * (t_nodes ** (-d - 1.0))[:, None], t_nodes, axis=0)
        # beyond the truncation the wrapped walk is uniform on the box
        part2 += (np.mean(f_vals) - f_vals) * t_nodes[-1] ** (-d) / d
        return part1 + part2

    ref_label = family[0][0]
    rows, c_values, trend = [], {}, []
    full, half = slice(None), slice(0, n_batches // 2)
    for d in deltas:
        frac_mult = fractional_symbol(symbol, d).values
        spectral = {label: np.fft.ifftn(frac_mult * np.fft.fftn(fields[label]["f"])).real
                    for label in fields}
        raw_ref = mc_raw(ref_label, d, full)
        c_cal = float(np.dot(raw_ref, spectral[ref_label]) / np.dot(raw_ref, raw_ref))
        raw_ref_half = mc_raw(ref_label, d, half)
        c_half = float(np.dot(raw_ref_half, spectral[ref_label])
                       / np.dot(raw_ref_half, raw_ref_half))
        c_values[d] = {"full": c_cal, "half": c_half,
                       "mellin": d / math.gamma(1.0 - d)}
        for label, _ in family:
            est = c_cal * mc_raw(label, d, full)
            target = spectral[label]
            scale = float(np.linalg.norm(target))
            disc = float(np.linalg.norm(est - target)) / scale
            per_batch = np.stack([c_cal * mc_raw(label, d, slice(b, b + 1))
                                  for b in range(n_batches)])
            se_field = np.std(per_batch, axis=0, ddof=1) / math.sqrt(n_batches)
            se_rel = float(np.linalg.norm(se_field)) / scale
            rows.append({
                "delta": d, "label": label, "lhs": disc, "rhs": 3.0 * se_rel,
                "ratio": disc / (3.0 * se_rel) if se_rel > 0 else 0.0,
                "c_delta": c_cal, "n_paths": n_paths,
            })
        gen_target = np.fft.ifftn(symbol.values * np.fft.fftn(fields[ref_label]["f"])).real
        gen_rel = float(np.linalg.norm(c_cal * raw_ref - gen_target)
                        / np.linalg.norm(gen_target))
        trend.append({"delta": d, "rel_to_generator": gen_rel})

    constant = max(r["ratio"] for r in rows)
    drift = max(abs(c_values[d]["half"] / c_values[d]["full"] - 1.0) for d in deltas)
    passed = constant <= 1.0 and drift < _MC_DRIFT

    canary = {"description": "fractional order 1.2", "flagged": False}
    try:
        fractional_representation_check(spec, delta=(1.2,), f_family=family[:1], n_paths=16)
    except ConfigError as exc:
        canary = {"description": "fractional order 1.2", "flagged": True, "message": str(exc)}

    trend_ok = all(trend[i]["rel_to_generator"] >= trend[i + 1]["rel_to_generator"]
                   for i in range(len(trend) - 1)) if len(trend) > 1 else True
    return EstimateReport(
        estimate_id="fractional-representation",
        parameters={"deltas": list(deltas), "n_paths": n_paths, "seed": seed,
                    "grid_size": grid.size, "grid_extent": grid.extent,
                    "family": [label for label, _ in family]},
        samples=tuple(rows),
        constant=constant,
        levels=(("paths-half", max(abs(c_values[d]["half"] / c_values[d]["mellin"] - 1.0)
                                   for d in deltas)),
                ("paths-full", max(abs(c_values[d]["full"] / c_values[d]["mellin"] - 1.0)
                                   for d in deltas))),
        drift=drift,
        threshold=_MC_DRIFT,
        passed=passed,
        notes={"calibrated_constants": {str(d): c_values[d] for d in deltas},
               "delta_trend": trend, "trend_monotone": trend_ok,
               "negative_control": canary},
    )
