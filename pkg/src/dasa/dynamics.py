"""State propagation under ``i d/dt psi = H psi`` and derived observables.

Two propagators share one time grid so their outputs line up sample by
sample:

* ``exact`` -- ``exp(-iHt) psi0`` through the biorthogonal eigenbasis of a
  constant ``H``.
* ``rk4`` -- classical fixed-step fourth-order Runge-Kutta; the only option
  for time-dependent ``H`` and an independent check on ``exact``.

States are never renormalized: under gain the total intensity grows past 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numba
import numpy as np

from dasa._validation import as_square_matrix, as_state, check_finite, check_positive
from dasa.exceptions import ConfigurationError, ExceptionalPointError, InvalidParameterError
from dasa.hamiltonian import Eigenstructure, eigenstructure_general

# dt * max|H_ij| must stay below this for the rk4 accuracy contract
RK4_STABILITY_LIMIT = 0.05
_CHUNK_STEPS = 200_000


@dataclass(frozen=True)
class PropagationConfig:
    """Time step, propagation method and output thinning.

    Every ``sample_stride``-th step is recorded, plus the final step.
    """

    dt: float = 1e-3
    method: Literal["exact", "rk4"] = "exact"
    sample_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "dt", check_positive("dt", self.dt))
        if self.method not in ("exact", "rk4"):
            raise ConfigurationError(f"method must be 'exact' or 'rk4', got {self.method!r}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ConfigurationError("sample_stride must be a positive integer")
        object.__setattr__(self, "sample_stride", int(self.sample_stride))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.shape[0] != self.times.shape[0]:
            raise InvalidParameterError("times and states must have matching length")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidParameterError("trajectory times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    @property
    def norm(self) -> np.ndarray:
        return self.populations.sum(axis=1)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)

    def extend(self, other: "Trajectory") -> "Trajectory":
        """Concatenate, dropping ``other``'s first sample if it repeats our last time."""
        if other.dim != self.dim:
            raise InvalidParameterError("cannot join trajectories of different dimension")
        start = 1 if other.times[0] == self.times[-1] else 0
        return Trajectory(
            np.concatenate([self.times, other.times[start:]]),
            np.concatenate([self.states, other.states[start:]]),
        )


def basis_state(dim: int, index: int) -> np.ndarray:
    """Bare state with a single unit amplitude at vector position ``index``."""
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def _grid(duration: float, dt: float, stride: int) -> tuple[int, float, np.ndarray]:
    """Number of steps, actual step and recorded step indices.

    The step is shrunk slightly so an integer number of steps lands exactly
    on ``duration``.
    """
    if duration == 0:
        return 0, 0.0, np.array([0])
    n = max(1, math.ceil(duration / dt - 1e-9))
    h = duration / n
    idx = np.arange(0, n + 1, stride)
    if idx[-1] != n:
        idx = np.append(idx, n)
    return n, h, idx


@numba.njit(cache=True)
def _rk4_kernel(hs, psi0, h, n_steps, record):
    d = psi0.shape[0]
    out = np.empty((record.shape[0], d), dtype=np.complex128)
    psi = psi0.copy()
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    k4 = np.empty(d, dtype=np.complex128)
    tmp = np.empty(d, dtype=np.complex128)
    r = 0
    if record[0] == 0:
        out[0, :] = psi
        r = 1
    for step in range(n_steps):
        ha = hs[2 * step]
        hm = hs[2 * step + 1]
        hb = hs[2 * step + 2]
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += ha[i, j] * psi[j]
            k1[i] = -1j * acc
        for i in range(d):
            tmp[i] = psi[i] + 0.5 * h * k1[i]
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += hm[i, j] * tmp[j]
            k2[i] = -1j * acc
        for i in range(d):
            tmp[i] = psi[i] + 0.5 * h * k2[i]
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += hm[i, j] * tmp[j]
            k3[i] = -1j * acc
        for i in range(d):
            tmp[i] = psi[i] + h * k3[i]
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += hb[i, j] * tmp[j]
            k4[i] = -1j * acc
        for i in range(d):
            psi[i] = psi[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if r < record.shape[0] and record[r] == step + 1:
            out[r, :] = psi
            r += 1
    return out


def integrate_rk4(hs: np.ndarray, psi0: np.ndarray, h: float, record: np.ndarray) -> np.ndarray:
    """Run RK4 over Hamiltonians sampled at half steps.

    ``hs[2k]``, ``hs[2k+1]`` and ``hs[2k+2]`` are ``H`` at the start, middle
    and end of step ``k``. Returns the states at the step indices in
    ``record`` (ascending, last entry = number of steps).
    """
    n_steps = (hs.shape[0] - 1) // 2
    if n_steps > 0 and h * np.max(np.abs(hs)) > RK4_STABILITY_LIMIT * (1 + 1e-12):
        raise ConfigurationError(
            f"dt={h:.3g} too large: dt*max|H| = {h * np.max(np.abs(hs)):.3g} exceeds {RK4_STABILITY_LIMIT}"
        )
    return _rk4_kernel(
        np.ascontiguousarray(hs, dtype=np.complex128),
        np.ascontiguousarray(psi0, dtype=np.complex128),
        float(h),
        int(n_steps),
        np.ascontiguousarray(record, dtype=np.int64),
    )


def _exact_states(es: Eigenstructure, psi0: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    c = es.coefficients(psi0)
    phases = np.exp(-1j * np.outer(offsets, es.eigenvalues))
    return (phases * c) @ es.right_vectors


def propagate_constant(
    H, psi0, duration: float, config: PropagationConfig | None = None, t0: float = 0.0
) -> Trajectory:
    """Evolve ``psi0`` under a constant ``H`` for ``duration``.

    With ``method="exact"`` the state at offset ``t`` is
    ``sum_i c_i exp(-i lambda_i t) |lambda_i>`` with ``c_i = <~lambda_i|psi0>``.
    At an exceptional point the exact route is impossible and RK4 is used.
    """
    config = config or PropagationConfig()
    m = as_square_matrix(H)
    psi0 = as_state(psi0, m.shape[0])
    duration = check_finite("duration", duration)
    if duration < 0:
        raise ConfigurationError("duration must be >= 0")
    n, h, idx = _grid(duration, config.dt, config.sample_stride)
    times = t0 + idx * h
    times[-1] = t0 + duration
    if duration == 0:
        return Trajectory(np.array([float(t0)]), psi0[None, :].copy())

    diag = np.diag(m)
    if np.all(m == np.diag(np.full(m.shape[0], diag[0]))):
        # scalar multiple of the identity: a pure phase, and a degenerate spectrum
        return Trajectory(times, np.exp(-1j * diag[0] * idx * h)[:, None] * psi0)
    if config.method == "exact":
        try:
            es = eigenstructure_general(m)
        except ExceptionalPointError:
            pass
        else:
            states = _exact_states(es, psi0, idx * h)
            states[0] = psi0  # the start sample is the input, not its reconstruction
            return Trajectory(times, states)
    hs = np.broadcast_to(m, (2 * n + 1,) + m.shape)
    return Trajectory(times, integrate_rk4(hs, psi0, h, idx))


def propagate_time_dependent(
    hfun: Callable,
    psi0,
    t0: float,
    t1: float,
    config: PropagationConfig | None = None,
    vectorized: bool = False,
) -> Trajectory:
    """Fixed-step RK4 for a time-dependent Hamiltonian.

    ``hfun(t)`` returns a matrix; with ``vectorized=True`` it instead takes
    an array of times and returns a stacked ``(len(t), n, n)`` array, which
    avoids one Python call per half step.

    Raises
    ------
    ConfigurationError
        If ``t1 <= t0`` or ``dt * max|H_ij| > 0.05`` anywhere on the grid.
    """
    config = config or PropagationConfig(method="rk4")
    t0, t1 = check_finite("t0", t0), check_finite("t1", t1)
    if t1 <= t0:
        raise ConfigurationError("t1 must be greater than t0")
    n, h, idx = _grid(t1 - t0, config.dt, config.sample_stride)

    def sample(k0, k1):
        # H at half steps k0/2 .. k1/2, last one pinned to t1
        ts = t0 + 0.5 * h * np.arange(k0, k1 + 1)
        if k1 == 2 * n:
            ts[-1] = t1
        if vectorized:
            return np.asarray(hfun(ts), dtype=complex)
        return np.stack([np.asarray(getattr(hfun(t), "entries", hfun(t)), dtype=complex) for t in ts])

    # integrate in chunks so long windows don't hold every H in memory
    chunks = []
    psi = None
    for s0 in range(0, n, _CHUNK_STEPS):
        s1 = min(n, s0 + _CHUNK_STEPS)
        hs = sample(2 * s0, 2 * s1)
        if psi is None:
            psi = as_state(psi0, hs.shape[1])
        rec = idx[(idx > s0) & (idx <= s1)] - s0
        if s0 == 0:
            rec = np.concatenate([[0], rec])
        # always record the chunk end so the next chunk can start from it
        out = integrate_rk4(hs, psi, h, np.unique(np.append(rec, s1 - s0)))
        psi = out[-1]
        chunks.append(out if (s1 - s0) in rec else out[:-1])
    times = t0 + idx * h
    times[-1] = t1
    return Trajectory(times, np.concatenate(chunks))


def biorthogonal_coefficients(es: Eigenstructure, psi) -> np.ndarray:
    """Expansion coefficients ``c_i = <~lambda_i|psi>`` in the right eigenbasis."""
    return es.coefficients(as_state(psi, es.dim))


@dataclass(frozen=True, eq=False)
class ObservableSeries:
    times: np.ndarray
    populations: np.ndarray
    norm: np.ndarray
    coefficients: np.ndarray | None = None

    @property
    def coefficient_magnitudes(self) -> np.ndarray | None:
        return None if self.coefficients is None else np.abs(self.coefficients)


def observables(traj: Trajectory, es: Eigenstructure | None = None) -> ObservableSeries:
    """Bare-state populations and norm, plus eigenbasis coefficients if ``es`` is given."""
    coeffs = None if es is None else traj.states @ es.left_vectors.T
    return ObservableSeries(traj.times, traj.populations, traj.norm, coeffs)
