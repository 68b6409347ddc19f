"""Cost-minimizing search over two-segment (loss, then gain) protocols.

A candidate fixes, per segment, the loss ``gamma2`` and detuning
``delta_omega`` of the site potentials, plus the loss-segment duration.
``gamma1`` comes from the constraint roots (``decay`` policy for the loss
segment, ``amplify`` for the gain segment) and the gain segment is cut
where the target population reaches one. Segment 1 sits at
``omega1 = 0, omega2 = -delta_omega``; segment 2 at
``omega1 = delta_omega, omega2 = 0``.

Infeasible candidates (no admissible root, no crossing, cut outside the
allowed window, fidelity below the floor) get infinite cost.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Literal, NamedTuple

import numpy as np
from scipy.optimize import minimize

from dasa._validation import check_finite
from dasa.dynamics import PropagationConfig, basis_state
from dasa.exceptions import ConfigurationError, InfeasibleError, NoFeasiblePointError
from dasa.hamiltonian import build_hamiltonian_2
from dasa.protocols import (
    REFERENCE_AMPLIFY_SEGMENT,
    REFERENCE_DECAY_END,
    REFERENCE_DECAY_SEGMENT,
    REFERENCE_T_START,
    Protocol,
    ProtocolSegment,
    build_protocol,
    cost_report,
    find_switch_time,
    run_protocol,
    segment_params,
)

Objective = Literal["max_abs_gamma", "sum_abs_gain_integrals", "active_duration"]
OBJECTIVES = ("max_abs_gamma", "sum_abs_gain_integrals", "active_duration")


@dataclass(frozen=True)
class DASAParams:
    gamma2_decay: float
    delta_omega_decay: float
    duration_decay: float
    gamma2_amplify: float
    delta_omega_amplify: float

    @classmethod
    def reference(cls) -> "DASAParams":
        return cls(
            gamma2_decay=REFERENCE_DECAY_SEGMENT[1],
            delta_omega_decay=REFERENCE_DECAY_SEGMENT[0],
            duration_decay=REFERENCE_DECAY_END - REFERENCE_T_START,
            gamma2_amplify=REFERENCE_AMPLIFY_SEGMENT[1],
            delta_omega_amplify=REFERENCE_AMPLIFY_SEGMENT[0],
        )

    def as_dict(self) -> dict:
        return asdict(self)


PARAM_NAMES = tuple(f.name for f in fields(DASAParams))


class Evaluation(NamedTuple):
    params: DASAParams
    cost: float
    fidelity: float


def _check_interval(name, bounds, exclude_zero=False, nonneg=False):
    lo, hi = (check_finite(name, b) for b in bounds)
    if lo > hi:
        raise ConfigurationError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
    if exclude_zero and lo <= 0 <= hi:
        raise ConfigurationError(f"{name}: bounds [{lo}, {hi}] must exclude 0")
    if nonneg and lo < 0:
        raise ConfigurationError(f"{name}: bounds must be >= 0")
    return (lo, hi)


@dataclass(frozen=True)
class SearchSpace:
    """Box bounds per parameter; ``lo == hi`` pins a coordinate.

    ``duration_amplify`` bounds the gain-segment length found by the
    switch-time search; its upper bound is also the search horizon.
    ``x0`` (optional) is evaluated first and seeds the first simplex.
    """

    gamma2_decay: tuple[float, float]
    delta_omega_decay: tuple[float, float]
    duration_decay: tuple[float, float]
    gamma2_amplify: tuple[float, float]
    delta_omega_amplify: tuple[float, float]
    duration_amplify: tuple[float, float] = (0.0, 10.0)
    fidelity_floor: float = 0.99
    cost_objective: Objective = "max_abs_gamma"
    x0: DASAParams | None = None

    def __post_init__(self):
        for name in ("gamma2_decay", "delta_omega_decay", "gamma2_amplify", "delta_omega_amplify"):
            object.__setattr__(self, name, _check_interval(name, getattr(self, name), exclude_zero=True))
        for name in ("duration_decay", "duration_amplify"):
            object.__setattr__(self, name, _check_interval(name, getattr(self, name), nonneg=True))
        if self.duration_decay[0] <= 0:
            raise ConfigurationError("duration_decay lower bound must be > 0")
        if not 0 < self.fidelity_floor < 1:
            raise ConfigurationError("fidelity_floor must lie in (0, 1)")
        if self.cost_objective not in OBJECTIVES:
            raise ConfigurationError(f"cost_objective must be one of {OBJECTIVES}")
        if self.x0 is not None:
            for name in PARAM_NAMES:
                lo, hi = getattr(self, name)
                if not lo <= getattr(self.x0, name) <= hi:
                    raise ConfigurationError(f"x0.{name} lies outside its bounds")

    @classmethod
    def around_reference(cls, **overrides) -> "SearchSpace":
        """A box containing the reference protocol, which is also the start point."""
        kw = dict(
            gamma2_decay=(-2.0, -0.1),
            delta_omega_decay=(2.0, 15.0),
            duration_decay=(2.0, 4.0),
            gamma2_amplify=(-1.0, -0.05),
            delta_omega_amplify=(-1.0, -0.005),
            duration_amplify=(0.0, 10.0),
            x0=DASAParams.reference(),
        )
        kw.update(overrides)
        return cls(**kw)

    @property
    def free(self) -> list[str]:
        return [n for n in PARAM_NAMES if getattr(self, n)[0] < getattr(self, n)[1]]

    def decode(self, u) -> DASAParams:
        values = {n: getattr(self, n)[0] for n in PARAM_NAMES}
        for n, ui in zip(self.free, u):
            lo, hi = getattr(self, n)
            values[n] = lo + float(np.clip(ui, 0.0, 1.0)) * (hi - lo)
        return DASAParams(**values)

    def encode(self, params: DASAParams) -> np.ndarray:
        out = []
        for n in self.free:
            lo, hi = getattr(self, n)
            out.append((getattr(params, n) - lo) / (hi - lo))
        return np.array(out)


@dataclass(frozen=True)
class OptimizationResult:
    best_params: DASAParams
    best_cost: float
    fidelity: float
    evaluations: int
    history: list[Evaluation]


def build_candidate_protocol(
    params: DASAParams,
    psi0=None,
    target=None,
    t_start: float = REFERENCE_T_START,
    duration_bounds: tuple[float, float] = (0.0, 10.0),
) -> Protocol:
    """Assemble the two-segment protocol for ``params``, cutting the gain segment at the crossing.

    Raises an :class:`InfeasibleError` subclass when no protocol exists.
    """
    psi0 = basis_state(2, 1) if psi0 is None else psi0
    target = basis_state(2, 0) if target is None else target
    p1 = segment_params(params.delta_omega_decay, params.gamma2_decay, "decay", 0.0, -params.delta_omega_decay)
    p2 = segment_params(params.delta_omega_amplify, params.gamma2_amplify, "amplify", params.delta_omega_amplify, 0.0)
    h1, h2 = build_hamiltonian_2(p1), build_hamiltonian_2(p2)
    seg1 = ProtocolSegment(h1, t_start, t_start + params.duration_decay)
    cut = find_switch_time(seg1, h2, psi0, target, horizon=duration_bounds[1])
    d2 = cut - seg1.t_end
    if not duration_bounds[0] <= d2 <= duration_bounds[1]:
        raise InfeasibleError(f"gain segment length {d2:.6g} outside {duration_bounds}")
    target_index = int(np.argmax(np.abs(np.asarray(target))))
    if d2 == 0:
        return build_protocol([h1], [seg1.t_start, seg1.t_end], target_index, "candidate")
    return build_protocol([h1, h2], [seg1.t_start, seg1.t_end, cut], target_index, "candidate")


def evaluate_candidate(
    params: DASAParams,
    psi0=None,
    target=None,
    objective: Objective = "max_abs_gamma",
    duration_bounds: tuple[float, float] = (0.0, 10.0),
) -> tuple[float, float]:
    """``(cost, fidelity)`` of a candidate; ``(inf, 0.0)`` when infeasible."""
    psi0 = basis_state(2, 1) if psi0 is None else psi0
    target = basis_state(2, 0) if target is None else target
    try:
        protocol = build_candidate_protocol(params, psi0, target, duration_bounds=duration_bounds)
    except InfeasibleError:
        return math.inf, 0.0
    # exact propagation needs only the endpoint; one step per segment
    _, report = run_protocol(protocol, psi0, PropagationConfig(dt=100.0), target=target)
    return float(getattr(cost_report(protocol), objective)), report.fidelity


class _BudgetExhausted(Exception):
    pass


def _initial_simplex(u0: np.ndarray, step: float = 0.15) -> np.ndarray:
    k = len(u0)
    simplex = np.tile(u0, (k + 1, 1))
    for i in range(k):
        simplex[i + 1, i] += step if u0[i] + step <= 1 else -step
    return simplex


def optimize(space: SearchSpace, budget: int, seed: int = 0, psi0=None, target=None) -> OptimizationResult:
    """Seeded Nelder-Mead with random restarts inside the unit-scaled box.

    The first simplex starts at ``space.x0`` (or the box centre); each
    restart draws a uniform start point from ``numpy.random.default_rng(seed)``.
    Stops after exactly ``budget`` evaluations.

    Raises
    ------
    NoFeasiblePointError
        If no evaluated candidate is feasible.
    """
    if budget < 1:
        raise ConfigurationError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    history: list[Evaluation] = []
    k = len(space.free)

    u_x0 = space.encode(space.x0) if space.x0 is not None else None
    u0 = np.full(k, 0.5) if u_x0 is None else u_x0.copy()

    def objective(u):
        if len(history) >= budget:
            raise _BudgetExhausted
        # the start point is evaluated as given, without round-trip drift
        params = space.x0 if u_x0 is not None and np.array_equal(u, u_x0) else space.decode(u)
        cost, fid = evaluate_candidate(params, psi0, target, space.cost_objective, space.duration_amplify)
        history.append(Evaluation(params, cost, fid))
        return cost if fid >= space.fidelity_floor else math.inf

    if k == 0:
        objective(u0)
    else:
        while len(history) < budget:
            try:
                minimize(
                    objective,
                    u0,
                    method="Nelder-Mead",
                    bounds=[(0.0, 1.0)] * k,
                    options={
                        "initial_simplex": _initial_simplex(u0),
                        "maxfev": budget - len(history),
                        "xatol": 1e-6,
                        "fatol": 1e-9,
                    },
                )
            except _BudgetExhausted:
                break
            u0 = rng.uniform(size=k)

    feasible = [e for e in history if e.fidelity >= space.fidelity_floor and math.isfinite(e.cost)]
    if not feasible:
        raise NoFeasiblePointError(f"no feasible candidate in {len(history)} evaluations", history)
    best = min(feasible, key=lambda e: e.cost)
    return OptimizationResult(best.params, best.cost, best.fidelity, len(history), history)
