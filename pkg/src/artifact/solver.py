"""Solution operators for the linear jump-driven evolution equation.

The solution is assembled from its explicit representation: the damped
semigroup applied to the initial datum, the resolvent time-convolution of
the deterministic forcing, and the compensated pathwise convolution of the
marked forcing against a Poisson sample.  Time stepping appears only in the
quadratures; the propagation between quadrature nodes is spectrally exact.

The resolvent quadrature interpolates the forcing linearly on each step and
integrates the propagator against it in closed form, so constant-in-time
forcing is reproduced exactly.  The compensator inside the stochastic
convolution uses the same rule, which makes it cancel bitwise against a
resolvent driven by the mark-averaged forcing.

Spatial operations act on the lattice trigonometric interpolant and are
exact there; the spectral-decay precondition is therefore enforced at the
final time (the kernel must be resolved by the horizon), not per quadrature
gap, where short propagation times are harmless lattice-exact evolutions.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .densities import _require_spectral_decay
from .errors import ConfigError, NumericalError
from .lattice import FrequencyGrid
from .process import JumpSample
from .symbols import SymbolField

__all__ = [
    "InputData",
    "MarkedForcing",
    "SolutionField",
    "mixed_mark_norm",
    "residual_check",
    "resolvent_apply",
    "semigroup_apply",
    "solve",
    "stochastic_convolution",
    "uniform_time_grid",
]

_BOUND_SLACK = 1e-9


def uniform_time_grid(T: float, n_nodes: int = 257) -> np.ndarray:
    if not (T > 0 and np.isfinite(T)):
        raise ConfigError("horizon T must be positive and finite")
    if n_nodes < 2:
        raise ConfigError("a time grid needs at least two nodes")
    return np.linspace(0.0, float(T), int(n_nodes))


def _uniform_times(time_grid) -> np.ndarray:
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ConfigError("time grid must be a nonempty one-dimensional array")
    if t[0] != 0.0:
        raise ConfigError("time grid must start at 0")
    if t.size > 1:
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ConfigError("time grid must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-12 * steps[0]:
            raise ConfigError("time grid must be uniform")
    return t


def _spatial_axes(grid: FrequencyGrid, lead: int) -> tuple:
    return tuple(range(lead, lead + grid.dim))


def _step_weights(z: np.ndarray, dt: float):
    """Propagator and node weights for one linear-interpolation step.

    Returns (e^{dt z}, w0, w1) with w0 = int_0^dt e^{uz} u/dt du and
    w1 = int_0^dt e^{uz} (1-u/dt) du, so that
    int_{t_j}^{t_{j+1}} e^{(t_k - s) z} f(s) ds
      = e^{(t_k - t_{j+1}) z} (w0 f_j + w1 f_{j+1}) for linear f.
    """
    x = dt * z
    propagator = np.exp(x)
    small = np.abs(x) < 1e-2
    safe = np.where(small, 1.0, x)
    w0 = dt * (propagator * (x - 1.0) + 1.0) / safe ** 2
    w1 = dt * (propagator - 1.0 - x) / safe ** 2
    # cancellation sets in as x -> 0; both weights tend to dt/2
    s0 = 0.5 + x * (1 / 3 + x * (1 / 8 + x * (1 / 30 + x * (1 / 144 + x * (1 / 840 + x / 5760)))))
    s1 = 0.5 + x * (1 / 6 + x * (1 / 24 + x * (1 / 120 + x * (1 / 720 + x * (1 / 5040 + x / 40320)))))
    w0 = np.where(small, dt * s0, w0)
    w1 = np.where(small, dt * s1, w1)
    return propagator, w0, w1


# ---------------------------------------------------------------------------
# input containers


@dataclass(frozen=True)
class MarkedForcing:
    """Time-indexed lattice forcing per mark, with the mark-space weights."""

    grid: FrequencyGrid
    marks: tuple
    weights: tuple
    values: np.ndarray = field(repr=False)  # (n_times, n_marks) + grid.shape

    def __post_init__(self):
        if len(self.marks) == 0 or len(self.marks) != len(self.weights):
            raise ConfigError("one weight per mark is required")
        w = np.array([float(v) for v in self.weights])
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ConfigError("mark weights must be positive and finite")
        v = np.asarray(self.values, dtype=float)
        if v.shape[1:] != (len(self.marks),) + self.grid.shape or v.ndim != 2 + self.grid.dim:
            raise ConfigError("marked forcing must be (time nodes, marks) + lattice shape")
        if not np.all(np.isfinite(v)):
            raise ConfigError("marked forcing must be finite")
        object.__setattr__(self, "values", v)

    @staticmethod
    def time_constant(grid: FrequencyGrid, marks, weights, fields, n_nodes: int) -> "MarkedForcing":
        """Forcing that holds the given per-mark fields on every time node."""
        base = np.asarray(fields, dtype=float)[None]
        return MarkedForcing(grid, tuple(marks), tuple(weights),
                             np.repeat(base, int(n_nodes), axis=0))

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    def pi_integral(self) -> np.ndarray:
        """Mark-averaged forcing: the compensator density per time node."""
        w = np.array(self.weights).reshape((1, -1) + (1,) * self.grid.dim)
        return (self.values * w).sum(axis=1)


@dataclass(frozen=True)
class InputData:
    """Problem data: initial datum, forcing, marked noise coefficient."""

    g: np.ndarray | None = None
    f: np.ndarray | None = None
    Phi: MarkedForcing | None = None
    lam: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ConfigError("the damping lambda must be nonnegative and finite")
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ConfigError("horizon T must be positive and finite")
        for name in ("g", "f"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if not np.all(np.isfinite(arr)):
                    raise ConfigError(f"input field {name} must be finite")
                object.__setattr__(self, name, arr)


def mixed_mark_norm(values: np.ndarray, weights, grid: FrequencyGrid,
                    q: float, p: float) -> float:
    """Mark-L_q against the weights, then lattice L_p: one time slice."""
    v = np.asarray(values, dtype=float)
    if v.shape != (len(tuple(weights)),) + grid.shape:
        raise ConfigError("mixed norm needs one lattice field per mark")
    w = np.array([float(x) for x in weights]).reshape((-1,) + (1,) * grid.dim)
    inner = (w * np.abs(v) ** q).sum(axis=0) ** (1.0 / q)
    return grid.lp_norm(inner, p)


# ---------------------------------------------------------------------------
# solution container


@dataclass(frozen=True)
class SolutionField:
    """Solution values on a uniform time grid over a fixed lattice."""

    grid: FrequencyGrid
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)  # (n_times,) + grid.shape
    lam: float
    noise_hash: str
    residual_stats: dict | None = None

    def __post_init__(self):
        t = _uniform_times(self.times)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (t.size,) + self.grid.shape:
            raise ConfigError("solution values must be (time nodes,) + lattice shape")
        if not np.all(np.isfinite(v)):
            raise NumericalError("solution contains nonfinite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def save(self, path_base, measure_key: str = ""):
        from . import persist

        return persist.save_array(
            path_base,
            self.values,
            {
                "measure_key": measure_key,
                "lambda": self.lam,
                "T": float(self.times[-1]),
                "grid": {"dim": self.grid.dim, "M": self.grid.size,
                         "extent": self.grid.extent},
                "seed": self.noise_hash,
            },
        )

    def norms_to_csv(self, path, p: float = 2.0):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", f"norm_p{p:g}"])
            for t, slice_ in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(self.grid.lp_norm(slice_, p))])


def _noise_hash(jumps: JumpSample | None) -> str:
    if jumps is None:
        return "no-noise"
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(jumps.times).tobytes())
    digest.update(repr(jumps.marks).encode())
    digest.update(repr(jumps.intensity).encode())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# the three operators


def _check_field(grid: FrequencyGrid, arr: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    if a.shape != grid.shape:
        raise ConfigError(f"{name} does not match the lattice shape")
    return a


def semigroup_apply(symbol: SymbolField, lam: float, t: float, g) -> np.ndarray:
    """Damped semigroup at time t: spectral multiplication by e^{t psi - lam t}."""
    if not (lam >= 0 and np.isfinite(lam)):
        raise ConfigError("the damping lambda must be nonnegative and finite")
    if not (t >= 0 and np.isfinite(t)):
        raise ConfigError("semigroup time must be nonnegative and finite")
    grid = symbol.grid
    g = _check_field(grid, g, "initial datum")
    if t == 0.0:
        return g.copy()
    char = np.exp(t * symbol.values)
    _require_spectral_decay(symbol, t, np.abs(char), 1.0)
    damped = math.exp(-lam * t)
    out = np.fft.ifftn(np.fft.fftn(g) * char).real * damped
    base = grid.lp_norm(g, 2.0)
    if grid.lp_norm(out, 2.0) > damped * base * (1.0 + _BOUND_SLACK):
        raise NumericalError("semigroup contraction violated on the lattice")
    return out


def _resolvent_hat(symbol: SymbolField, lam: float, f_hat: np.ndarray,
                   dt: float) -> np.ndarray:
    """Running spectral convolution integral on the uniform grid."""
    propagator, w0, w1 = _step_weights(symbol.values - lam, dt)
    out = np.zeros_like(f_hat)
    acc = np.zeros_like(f_hat[0])
    for k in range(f_hat.shape[0] - 1):
        acc = propagator * acc + w0 * f_hat[k] + w1 * f_hat[k + 1]
        out[k + 1] = acc
    return out


def _rho_discrete(lam: float, dt: float, T: float) -> float:
    """Exact majorant of the discrete convolution weights, tending to rho."""
    if lam == 0.0:
        return T
    return float(min(T, dt / -math.expm1(-lam * dt)))


def resolvent_apply(symbol: SymbolField, lam: float, f, time_grid) -> np.ndarray:
    """Time convolution of the damped semigroup against the forcing samples."""
    if not (lam >= 0 and np.isfinite(lam)):
        raise ConfigError("the damping lambda must be nonnegative and finite")
    times = _uniform_times(time_grid)
    grid = symbol.grid
    f = np.asarray(f, dtype=float)
    if f.shape != (times.size,) + grid.shape:
        raise ConfigError("forcing must be sampled as (time nodes,) + lattice shape")
    out = np.zeros_like(f)
    if times.size == 1:
        return out
    T = float(times[-1])
    _require_spectral_decay(symbol, T, np.abs(np.exp(T * symbol.values)), 1.0)
    axes = _spatial_axes(grid, 1)
    f_hat = np.fft.fftn(f.astype(complex), axes=axes)
    r_hat = _resolvent_hat(symbol, lam, f_hat, float(times[1] - times[0]))
    out = np.fft.ifftn(r_hat, axes=axes).real
    bound = _rho_discrete(lam, float(times[1] - times[0]), T)
    peak = max(grid.lp_norm(s, 2.0) for s in f)
    for s in out:
        if grid.lp_norm(s, 2.0) > bound * peak * (1.0 + _BOUND_SLACK) + 1e-300:
            raise NumericalError("resolvent bound violated on the lattice")
    return out


def _match_mark_space(Phi: MarkedForcing, jumps: JumpSample) -> dict:
    declared = dict(zip(Phi.marks, (float(w) for w in Phi.weights)))
    sampled = {z: float(w) for z, w in jumps.intensity}
    if set(declared) != set(sampled):
        raise ConfigError("the forcing mark set does not match the jump sample's mark space")
    for z, w in sampled.items():
        if not math.isclose(declared[z], w, rel_tol=1e-12):
            raise ConfigError(f"mark weight mismatch at {z!r}")
    return {z: i for i, z in enumerate(Phi.marks)}


def stochastic_convolution(symbol: SymbolField, lam: float, Phi: MarkedForcing,
                           jumps: JumpSample, time_grid) -> np.ndarray:
    """Pathwise compensated convolution of the marked forcing.

    Jump terms propagate spectrally from each jump time; the compensator is
    the resolvent quadrature of the mark-averaged forcing, so it cancels
    exactly against `resolvent_apply` driven by `Phi.pi_integral()`.
    """
    if not (lam >= 0 and np.isfinite(lam)):
        raise ConfigError("the damping lambda must be nonnegative and finite")
    times = _uniform_times(time_grid)
    grid = symbol.grid
    if Phi.grid != grid:
        raise ConfigError("forcing lattice does not match the symbol lattice")
    if Phi.n_times != times.size:
        raise ConfigError("forcing must be sampled on the time grid")
    index = _match_mark_space(Phi, jumps)
    T = float(times[-1])
    if jumps.horizon < T - 1e-12 * T:
        raise ConfigError("the jump sample must cover the solution horizon")
    out = np.zeros((times.size,) + grid.shape)
    if times.size == 1:
        return out
    dt = float(times[1] - times[0])
    _require_spectral_decay(symbol, T, np.abs(np.exp(T * symbol.values)), 1.0)

    axes = _spatial_axes(grid, 2)
    phi_hat = np.fft.fftn(Phi.values.astype(complex), axes=axes)
    z = symbol.values - lam
    propagator, _, _ = _step_weights(z, dt)
    keep = jumps.times <= T
    s_times = jumps.times[keep]
    s_marks = [jumps.marks[i] for i in np.flatnonzero(keep)]
    cell = np.searchsorted(times, s_times, side="left") - 1

    comp_hat = _resolvent_hat(
        symbol, lam,
        np.fft.fftn(Phi.pi_integral().astype(complex), axes=_spatial_axes(grid, 1)),
        dt,
    )
    acc = np.zeros(grid.shape, dtype=complex)
    start = 0
    for k in range(times.size - 1):
        acc = propagator * acc
        stop = start
        while stop < len(s_times) and cell[stop] == k:
            stop += 1
        for i in range(start, stop):
            s, col = s_times[i], index[s_marks[i]]
            frac = (s - times[k]) / dt
            slice_hat = (1.0 - frac) * phi_hat[k, col] + frac * phi_hat[k + 1, col]
            acc = acc + np.exp((times[k + 1] - s) * z) * slice_hat
        start = stop
        out[k + 1] = np.fft.ifftn(acc - comp_hat[k + 1]).real
    return out


def solve(symbol: SymbolField, input_data: InputData, jumps: JumpSample | None,
          time_grid) -> SolutionField:
    """Assemble the solution from its three-operator representation."""
    times = _uniform_times(time_grid)
    grid = symbol.grid
    if not math.isclose(float(times[-1]), input_data.T, rel_tol=1e-12):
        raise ConfigError("time grid horizon does not match the input horizon")
    lam = float(input_data.lam)
    values = np.zeros((times.size,) + grid.shape)

    if input_data.g is not None:
        g = _check_field(grid, input_data.g, "initial datum")
        if times.size > 1:
            _require_spectral_decay(
                symbol, float(times[-1]),
                np.abs(np.exp(float(times[-1]) * symbol.values)), 1.0)
        g_hat = np.fft.fftn(g.astype(complex))
        values[0] = g
        for k in range(1, times.size):
            t = float(times[k])
            values[k] = np.fft.ifftn(
                g_hat * np.exp(t * (symbol.values - lam))).real

    if input_data.f is not None:
        values += resolvent_apply(symbol, lam, input_data.f, times)

    if input_data.Phi is not None:
        if jumps is None:
            raise ConfigError("a marked forcing needs a jump sample")
        values += stochastic_convolution(symbol, lam, input_data.Phi, jumps, times)

    return SolutionField(grid, times, values, lam, _noise_hash(jumps))


# ---------------------------------------------------------------------------
# residual verification


def _cumulative_trapezoid(samples: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(samples)
    steps = 0.5 * dt * (samples[1:] + samples[:-1])
    out[1:] = np.cumsum(steps, axis=0)
    return out


def residual_check(solution: SolutionField, symbol: SymbolField,
                   input_data: InputData, jumps: JumpSample | None) -> dict:
    """Defect of the solution in the integral form of the equation."""
    times = solution.times
    grid = solution.grid
    if grid != symbol.grid:
        raise ConfigError("solution lattice does not match the symbol lattice")
    u = solution.values
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    axes = _spatial_axes(grid, 1)
    lu = np.fft.ifftn(np.fft.fftn(u.astype(complex), axes=axes) * symbol.values,
                      axes=axes).real
    integrand = lu - input_data.lam * u
    if input_data.f is not None:
        integrand = integrand + input_data.f
    jump_sum = np.zeros_like(u)
    if input_data.Phi is not None:
        if jumps is None:
            raise ConfigError("a marked forcing needs a jump sample")
        Phi = input_data.Phi
        index = _match_mark_space(Phi, jumps)
        integrand = integrand - Phi.pi_integral()
        for s, mark in zip(jumps.times, jumps.marks):
            if s > times[-1]:
                continue
            k = int(np.searchsorted(times, s, side="left") - 1)
            frac = (s - times[k]) / dt
            col = index[mark]
            slice_ = (1.0 - frac) * Phi.values[k, col] + frac * Phi.values[k + 1, col]
            jump_sum[times >= s] += slice_
    g = input_data.g if input_data.g is not None else np.zeros(grid.shape)
    residual = u - g - _cumulative_trapezoid(integrand, dt) - jump_sum
    per_node = [grid.lp_norm(r, 2.0) for r in residual]
    return {
        "max_residual": float(max(per_node)),
        "per_node": per_node,
        "p": 2.0,
        "dt": dt,
        "n_nodes": int(times.size),
    }
