"""Piecewise-constant gain/loss protocols and the Landau-Zener baseline.

A :class:`Protocol` is a contiguous run of constant Hamiltonians followed
by an identity tail. The two presets move the population from the initial
ground state ``(0, 1)`` (or ``(0, 0, 1)``) into ``(1, 0)`` (``(1, 0, 0)``):
a loss segment drains the unwanted eigenstate, then a gain segment grows the
wanted one until its population reaches one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dasa._validation import as_square_matrix, as_state, check_finite, check_positive
from dasa.dynamics import (
    PropagationConfig,
    Trajectory,
    basis_state,
    propagate_constant,
    propagate_time_dependent,
)
from dasa.exceptions import ConfigurationError, InvalidParameterError, NoCrossingError
from dasa.hamiltonian import (
    HamiltonianMatrix,
    TwoLevelParams,
    build_hamiltonian_2,
    build_hamiltonian_3,
    eigenstructure_general,
    gamma1_roots,
)

REFERENCE_T_START = -15.0
REFERENCE_DECAY_END = -12.0
REFERENCE_SWITCH_2LEVEL = -11.358
REFERENCE_SWITCH_3LEVEL = -10.7374
REFERENCE_MIDDLE_ONSITE = 15.0

# (delta_omega, gamma2, root policy, omega1, omega2) for the loss and gain segments
REFERENCE_DECAY_SEGMENT = (10.0, -0.95, "decay", 0.0, -10.0)
REFERENCE_AMPLIFY_SEGMENT = (-0.01, -0.25, "largest", -0.01, 0.0)

LZ_WINDOW_SCALE = 50.0
# dt * max|H| used for sweeps; tighter than the rk4 limit so the norm holds to 1e-8
LZ_STEP_SCALE = 0.01


# --------------------------------------------------------------------------
# protocol types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolSegment:
    hamiltonian: HamiltonianMatrix
    t_start: float
    t_end: float

    def __post_init__(self):
        if not isinstance(self.hamiltonian, HamiltonianMatrix):
            object.__setattr__(self, "hamiltonian", HamiltonianMatrix(self.hamiltonian))
        check_finite("t_start", self.t_start)
        check_finite("t_end", self.t_end)
        if not self.t_end > self.t_start:
            raise InvalidParameterError(f"segment end {self.t_end} must exceed start {self.t_start}")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Protocol:
    """Contiguous constant segments, then ``H = 1`` from the last switch on.

    ``target_index`` is the bare state the protocol is meant to populate.
    """

    segments: tuple[ProtocolSegment, ...]
    target_index: int = 0
    name: str = ""

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise InvalidParameterError("a protocol needs at least one segment")
        dims = {s.hamiltonian.dim for s in segs}
        if len(dims) != 1:
            raise InvalidParameterError("all segments must share one dimension")
        for a, b in zip(segs, segs[1:]):
            if a.t_end != b.t_start:
                raise InvalidParameterError("segments must be contiguous")
        if not 0 <= self.target_index < self.dim:
            raise InvalidParameterError("target_index out of range")

    @property
    def dim(self) -> int:
        return self.segments[0].hamiltonian.dim

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def active_duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def switch_times(self) -> list[float]:
        return [self.t_start] + [s.t_end for s in self.segments]

    @property
    def target(self) -> np.ndarray:
        return basis_state(self.dim, self.target_index)

    def hamiltonian_at(self, t: float) -> np.ndarray:
        """Heaviside composition, right-continuous: ties go to the later segment."""
        if t < self.t_start:
            return np.zeros((self.dim, self.dim), dtype=complex)
        for s in self.segments:
            if s.t_start <= t < s.t_end:
                return np.array(s.hamiltonian.entries)
        return np.eye(self.dim, dtype=complex)


def build_protocol(
    hamiltonians: Sequence[HamiltonianMatrix],
    switch_times: Sequence[float],
    target_index: int = 0,
    name: str = "",
) -> Protocol:
    if len(switch_times) != len(hamiltonians) + 1:
        raise InvalidParameterError("need one more switch time than Hamiltonians")
    segs = [
        ProtocolSegment(h, float(a), float(b))
        for h, a, b in zip(hamiltonians, switch_times[:-1], switch_times[1:])
    ]
    return Protocol(tuple(segs), target_index, name)


def segment_params(delta_omega, gamma2, policy, omega1, omega2) -> TwoLevelParams:
    """Site potentials with ``gamma1`` picked from the constraint roots by ``policy``."""
    root = gamma1_roots(delta_omega, gamma2).select(policy)
    return TwoLevelParams.from_values(omega1, root.gamma1, omega2, gamma2)


def reference_params() -> tuple[TwoLevelParams, TwoLevelParams]:
    """Site potentials of the loss (first) and gain (second) segment."""
    return segment_params(*REFERENCE_DECAY_SEGMENT), segment_params(*REFERENCE_AMPLIFY_SEGMENT)


def build_dasa_2level(
    switch_time: float = REFERENCE_SWITCH_2LEVEL,
    t_start: float = REFERENCE_T_START,
    decay_end: float = REFERENCE_DECAY_END,
) -> Protocol:
    p1, p2 = reference_params()
    return build_protocol(
        [build_hamiltonian_2(p1), build_hamiltonian_2(p2)],
        [t_start, decay_end, switch_time],
        target_index=0,
        name="dasa2",
    )


def build_dasa_3level(
    switch_time: float = REFERENCE_SWITCH_3LEVEL,
    t_start: float = REFERENCE_T_START,
    decay_end: float = REFERENCE_DECAY_END,
    middle: complex = REFERENCE_MIDDLE_ONSITE,
) -> Protocol:
    """Three-site chain reusing the two-level gain/loss on the outer sites."""
    p1, p2 = reference_params()
    return build_protocol(
        [build_hamiltonian_3(p1, middle), build_hamiltonian_3(p2, middle)],
        [t_start, decay_end, switch_time],
        target_index=0,
        name="dasa3",
    )


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FidelityReport:
    target: np.ndarray
    final_population: float
    residual_populations: np.ndarray
    final_norm: float
    transfer_complete_time: float | None = None

    @property
    def fidelity(self) -> float:
        """Raw target population, penalizing overshoot past one symmetrically."""
        return 1.0 - abs(1.0 - self.final_population)


def fidelity_report(traj: Trajectory, target, threshold: float = 0.99) -> FidelityReport:
    target = as_state(target, traj.dim)
    pops = np.abs(traj.states @ target.conj()) ** 2
    k = int(np.argmax(target != 0)) if np.count_nonzero(target) == 1 else None
    final = traj.populations[-1]
    residual = np.delete(final, k) if k is not None else final
    hit = np.nonzero(pops >= threshold)[0]
    return FidelityReport(
        target=target,
        final_population=float(pops[-1]),
        residual_populations=residual,
        final_norm=float(traj.norm[-1]),
        transfer_complete_time=float(traj.times[hit[0]]) if hit.size else None,
    )


@dataclass(frozen=True, eq=False)
class CostReport:
    """Gain/loss expenditure of a protocol.

    Several aggregates are reported since no single one is canonical:
    signed per-site integrals of ``gamma * duration``, their sum
    (``sigma_gamma_integral``), positive and negative parts, and the sum of
    absolute values.
    """

    per_site_gain_integral: np.ndarray
    sigma_gamma_integral: float
    max_abs_gamma: float
    active_duration: float
    gain_integral: float
    loss_integral: float
    sum_abs_gain_integrals: float
    per_segment_gammas: list[list[float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "per_site_gain_integral": [float(x) for x in self.per_site_gain_integral],
            "sigma_gamma_integral": self.sigma_gamma_integral,
            "max_abs_gamma": self.max_abs_gamma,
            "active_duration": self.active_duration,
            "gain_integral": self.gain_integral,
            "loss_integral": self.loss_integral,
            "sum_abs_gain_integrals": self.sum_abs_gain_integrals,
            "per_segment_gammas": self.per_segment_gammas,
        }


def cost_report(p: Protocol) -> CostReport:
    gammas = np.array([s.hamiltonian.onsite.imag for s in p.segments])
    durations = np.array([s.duration for s in p.segments])
    weighted = gammas * durations[:, None]
    return CostReport(
        per_site_gain_integral=weighted.sum(axis=0),
        sigma_gamma_integral=float(weighted.sum()),
        max_abs_gamma=float(np.abs(gammas).max()),
        active_duration=float(durations.sum()),
        gain_integral=float(weighted[weighted > 0].sum()),
        loss_integral=float(weighted[weighted < 0].sum()),
        sum_abs_gain_integrals=float(np.abs(weighted).sum()),
        per_segment_gammas=gammas.tolist(),
    )


# --------------------------------------------------------------------------
# running protocols
# --------------------------------------------------------------------------


def run_protocol(
    p: Protocol,
    psi0,
    prop: PropagationConfig | None = None,
    target=None,
    tail_duration: float = 0.0,
) -> tuple[Trajectory, FidelityReport]:
    """Propagate ``psi0`` through every segment (and optionally the identity tail).

    Fidelity is measured on the raw, unrenormalized state at the end.
    """
    prop = prop or PropagationConfig()
    psi = as_state(psi0, p.dim)
    traj = None
    pieces = [(s.hamiltonian.entries, s.t_start, s.t_end) for s in p.segments]
    if tail_duration > 0:
        pieces.append((np.eye(p.dim, dtype=complex), p.t_end, p.t_end + tail_duration))
    for h, t0, t1 in pieces:
        piece = propagate_constant(h, psi, t1 - t0, prop, t0=t0)
        # pin the endpoint to the switch time so consecutive segments share it exactly
        piece = Trajectory(np.append(piece.times[:-1], t1), piece.states)
        traj = piece if traj is None else traj.extend(piece)
        psi = piece.final_state
    target = p.target if target is None else target
    return traj, fidelity_report(traj, target)


def _final_state(H, psi0, duration: float) -> np.ndarray:
    return propagate_constant(H, psi0, duration, PropagationConfig(dt=max(duration, 1e-3))).final_state


def find_switch_time(
    decay_segment: ProtocolSegment,
    amplify_H,
    psi0,
    target,
    horizon: float = 10.0,
    pop_tol: float = 1e-10,
    scan_step: float = 1e-3,
) -> float:
    """Absolute time at which the gain segment should be cut.

    ``psi0`` evolves through ``decay_segment``; the gain Hamiltonian then
    acts until the target population ``|<target|psi>|**2`` first reaches one.
    The first crossing is bracketed on a ``scan_step`` grid and refined by
    bisection until the population is within ``pop_tol`` of one.

    Raises
    ------
    NoCrossingError
        If the population stays below one for ``horizon`` time units.
    """
    target = as_state(target)
    psi = _final_state(decay_segment.hamiltonian, as_state(psi0, decay_segment.hamiltonian.dim), decay_segment.duration)
    es = eigenstructure_general(amplify_H)
    amp = (es.right_vectors @ target.conj()) * es.coefficients(psi)
    lam = es.eigenvalues

    def excess(tau):
        return np.abs(np.exp(-1j * np.multiply.outer(tau, lam)) @ amp) ** 2 - 1.0

    t_cut0 = decay_segment.t_end
    if excess(0.0) >= 0:
        return t_cut0
    taus = np.arange(0.0, horizon + scan_step, scan_step)
    above = np.nonzero(excess(taus) >= 0)[0]
    if above.size == 0:
        raise NoCrossingError(f"target population stays below 1 for {horizon} time units after t={t_cut0}")
    lo, hi = taus[above[0] - 1], taus[above[0]]
    while True:
        mid = 0.5 * (lo + hi)
        f = excess(mid)
        if abs(f) <= pop_tol or mid in (lo, hi):
            return t_cut0 + float(mid)
        if f < 0:
            lo = mid
        else:
            hi = mid


# --------------------------------------------------------------------------
# Landau-Zener baseline
# --------------------------------------------------------------------------


def lz_hamiltonian(epsilon: float, t: float) -> HamiltonianMatrix:
    """``sigma_x - eps**2 t sigma_z``."""
    check_positive("epsilon", epsilon)
    d = epsilon * epsilon * t
    return HamiltonianMatrix(np.array([[-d, 1.0], [1.0, d]], dtype=complex))


def lz_hamiltonians(epsilon: float, times) -> np.ndarray:
    """Stacked :func:`lz_hamiltonian` over an array of times."""
    d = epsilon * epsilon * np.asarray(times, dtype=float)
    hs = np.empty(d.shape + (2, 2), dtype=complex)
    hs[..., 0, 0] = -d
    hs[..., 1, 1] = d
    hs[..., 0, 1] = hs[..., 1, 0] = 1.0
    return hs


def lz_transfer_probability(epsilon: float) -> float:
    """Asymptotic adiabatic transfer ``1 - exp(-pi / eps**2)``."""
    return 1.0 - math.exp(-math.pi / (epsilon * epsilon))


@dataclass(frozen=True)
class LZConfig:
    """Sweep rate and time window; the window defaults to ``+-50 / eps**2``."""

    epsilon: float
    t_start: float | None = None
    t_end: float | None = None

    def __post_init__(self):
        eps = check_positive("epsilon", self.epsilon)
        half = LZ_WINDOW_SCALE / (eps * eps)
        if self.t_start is None:
            object.__setattr__(self, "t_start", -half)
        if self.t_end is None:
            object.__setattr__(self, "t_end", half)
        if not self.t_end > self.t_start:
            raise ConfigurationError("LZ window end must exceed its start")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def lz_sweep(config: LZConfig, prop: PropagationConfig | None = None) -> tuple[Trajectory, FidelityReport]:
    """Sweep from ``(0, 1)`` and report the population reaching ``(1, 0)``.

    Always integrated with RK4 (``prop.method`` is ignored). The step is
    ``min(prop.dt, 0.01 / max|H|)``: over a window this wide, RK4 at the
    bare stability limit drifts the norm by ~1e-5.

    Raises
    ------
    ConfigurationError
        If ``eps**2 * |t|`` is below 50 at either end of the window.
    """
    prop = prop or PropagationConfig()
    eps2 = config.epsilon ** 2
    edge = min(-config.t_start, config.t_end) * eps2
    if edge < LZ_WINDOW_SCALE * (1 - 1e-12):
        raise ConfigurationError(
            f"LZ window too narrow: eps^2*|t| = {edge:.3g} at the edge, need >= {LZ_WINDOW_SCALE}"
        )
    hmax = eps2 * max(-config.t_start, config.t_end)
    traj = propagate_time_dependent(
        lambda ts: lz_hamiltonians(config.epsilon, ts),
        basis_state(2, 1),
        config.t_start,
        config.t_end,
        PropagationConfig(min(prop.dt, LZ_STEP_SCALE / hmax), "rk4", prop.sample_stride),
        vectorized=True,
    )
    return traj, fidelity_report(traj, basis_state(2, 0))


def lz_protocol_cost(config: LZConfig) -> CostReport:
    """The Hermitian sweep spends no gain; only its duration counts."""
    return CostReport(np.zeros(2), 0.0, 0.0, config.duration, 0.0, 0.0, 0.0, [])
