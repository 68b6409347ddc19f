"""Two-level (and chain three-level) non-Hermitian Hamiltonians in coupling units.

The two-level family is

    H = [[w1 + i g1, 1], [1, w2 + i g2]]

with on-site frequencies ``w`` and gain (``g > 0``) or loss (``g < 0``).
For the special choice of ``g1`` returned by :func:`gamma1_roots` one
eigenvalue of ``H`` is exactly real and the other carries the whole
imaginary part ``g1 + g2``, so the matching eigenvector decays or grows
exponentially while the other one only picks up a phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from dasa._validation import as_square_matrix, check_finite
from dasa.exceptions import (
    ExceptionalPointError,
    InvalidParameterError,
    RootSelectionError,
    SingularParameterError,
    UnsupportedRegimeError,
)

REALNESS_TOL = 1e-9
RESIDUAL_TOL = 1e-10
SEPARATION_TOL = 1e-8
ROOT_RESIDUAL_TOL = 1e-9
SIGMA_GAMMA_MIN = 1e-9


@dataclass(frozen=True)
class SitePotential:
    """Complex on-site potential ``omega + i*gamma`` in coupling units."""

    omega: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "omega", check_finite("omega", self.omega))
        object.__setattr__(self, "gamma", check_finite("gamma", self.gamma))

    @property
    def value(self) -> complex:
        return complex(self.omega, self.gamma)


@dataclass(frozen=True)
class TwoLevelParams:
    site1: SitePotential
    site2: SitePotential

    @classmethod
    def from_values(cls, omega1, gamma1, omega2, gamma2) -> "TwoLevelParams":
        return cls(SitePotential(omega1, gamma1), SitePotential(omega2, gamma2))

    @property
    def omega1(self) -> float:
        return self.site1.omega

    @property
    def gamma1(self) -> float:
        return self.site1.gamma

    @property
    def omega2(self) -> float:
        return self.site2.omega

    @property
    def gamma2(self) -> float:
        return self.site2.gamma

    @property
    def delta_omega(self) -> float:
        return self.site1.omega - self.site2.omega

    @property
    def sigma_omega(self) -> float:
        return self.site1.omega + self.site2.omega

    @property
    def delta_gamma(self) -> float:
        return self.site1.gamma - self.site2.gamma

    @property
    def sigma_gamma(self) -> float:
        return self.site1.gamma + self.site2.gamma


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Read-only ``dim x dim`` complex matrix with unit nearest-neighbour couplings.

    For ``dim == 3`` the corners are zero (a three-site chain).
    """

    entries: np.ndarray

    def __post_init__(self):
        m = as_square_matrix(self.entries)
        n = m.shape[0]
        for i in range(n - 1):
            if m[i, i + 1] != 1 or m[i + 1, i] != 1:
                raise InvalidParameterError("nearest-neighbour couplings must equal 1")
        if n == 3 and (m[0, 2] != 0 or m[2, 0] != 0):
            raise InvalidParameterError("corner couplings of a 3-level chain must be 0")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def onsite(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, HamiltonianMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"HamiltonianMatrix({np.array2string(self.entries, precision=6)})"


def build_hamiltonian_2(params: TwoLevelParams) -> HamiltonianMatrix:
    """Two-level member of the family: ``[[w1+i g1, 1], [1, w2+i g2]]``."""
    return HamiltonianMatrix(
        np.array([[params.site1.value, 1.0], [1.0, params.site2.value]], dtype=complex)
    )


def build_hamiltonian_3(params: TwoLevelParams, middle: complex = 15.0) -> HamiltonianMatrix:
    """Three-site chain with the two-level site potentials on the outer sites."""
    middle = complex(middle)
    if not np.isfinite(middle):
        raise InvalidParameterError("middle on-site potential must be finite")
    return HamiltonianMatrix(
        np.array(
            [
                [params.site1.value, 1.0, 0.0],
                [1.0, middle, 1.0],
                [0.0, 1.0, params.site2.value],
            ],
            dtype=complex,
        )
    )


# --------------------------------------------------------------------------
# gamma1 constraint
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RootRecord:
    gamma1: float
    sigma_gamma: float
    residual: float
    valid: bool


@dataclass(frozen=True)
class GammaRootSet:
    """Real roots ``gamma1`` of the one-real-eigenvalue constraint, ascending."""

    delta_omega: float
    gamma2: float
    roots: tuple[RootRecord, ...] = field(default_factory=tuple)

    @property
    def valid_roots(self) -> list[RootRecord]:
        return [r for r in self.roots if r.valid]

    def decay_roots(self) -> list[RootRecord]:
        return [r for r in self.valid_roots if r.sigma_gamma < 0]

    def amplify_roots(self) -> list[RootRecord]:
        return [r for r in self.valid_roots if r.sigma_gamma > 0]

    def select(self, policy: Literal["largest", "smallest", "decay", "amplify"]) -> RootRecord:
        """Pick one valid root.

        ``largest``/``smallest`` order by ``gamma1``. ``decay`` takes the
        loss-side root (``sigma_gamma < 0``) of smallest ``|gamma1|``;
        ``amplify`` the gain-side root of largest ``gamma1``.
        """
        if policy == "largest":
            pool = self.valid_roots
            key = lambda r: -r.gamma1  # noqa: E731
        elif policy == "smallest":
            pool = self.valid_roots
            key = lambda r: r.gamma1  # noqa: E731
        elif policy == "decay":
            pool = self.decay_roots()
            key = lambda r: abs(r.gamma1)  # noqa: E731
        elif policy == "amplify":
            pool = self.amplify_roots()
            key = lambda r: -r.gamma1  # noqa: E731
        else:
            raise ValueError(f"unknown root policy {policy!r}")
        if not pool:
            raise RootSelectionError(
                f"no valid root for policy {policy!r} at "
                f"delta_omega={self.delta_omega}, gamma2={self.gamma2}"
            )
        return min(pool, key=key)


def constraint_coefficients(delta_omega: float, gamma2: float) -> np.ndarray:
    """Cubic coefficients (highest power first) of the gamma1 constraint.

    Expanding ``y**2 + g1*g2*(y**2 + dw**2) = 0`` with ``y = g1 + g2``.
    """
    g2 = gamma2
    return np.array(
        [g2, 1.0 + 2.0 * g2 * g2, g2 * (2.0 + g2 * g2 + delta_omega * delta_omega), g2 * g2]
    )


def constraint_residual(gamma1, delta_omega: float, gamma2: float):
    y = gamma1 + gamma2
    return y * y + gamma1 * gamma2 * (y * y + delta_omega * delta_omega)


def _polish(coeffs: np.ndarray, x: float, steps: int = 3) -> float:
    dcoeffs = np.polyder(coeffs)
    best, best_r = x, abs(np.polyval(coeffs, x))
    for _ in range(steps):
        d = np.polyval(dcoeffs, x)
        if d == 0:
            break
        x = x - np.polyval(coeffs, x) / d
        r = abs(np.polyval(coeffs, x))
        if r < best_r:
            best, best_r = x, r
    return float(best)


def _companion_roots(coeffs: np.ndarray) -> np.ndarray:
    monic = coeffs[1:] / coeffs[0]
    companion = np.zeros((3, 3))
    companion[0, :] = -monic
    companion[1, 0] = companion[2, 1] = 1.0
    return np.linalg.eigvals(companion)


def all_constraint_roots(delta_omega: float, gamma2: float) -> np.ndarray:
    """All three (possibly complex) roots of the cubic, sorted by real then imaginary part."""
    z = _companion_roots(constraint_coefficients(delta_omega, gamma2))
    return z[np.lexsort((z.imag, z.real))]


def gamma1_roots(delta_omega: float, gamma2: float) -> GammaRootSet:
    """All real ``gamma1`` making one eigenvalue of the 2x2 Hamiltonian real.

    The cubic is solved through the eigenvalues of its companion matrix;
    near-real candidates are Newton-polished and validated by
    back-substitution. Roots with ``|gamma1 + gamma2| <= 1e-9`` are kept but
    flagged invalid (both eigenvalues would be real).

    Raises
    ------
    UnsupportedRegimeError
        If ``delta_omega == 0`` or ``gamma2 == 0``.
    """
    dw = check_finite("delta_omega", delta_omega)
    g2 = check_finite("gamma2", gamma2)
    if dw == 0:
        raise UnsupportedRegimeError("delta_omega = 0 admits no Hamiltonian of this class")
    if g2 == 0:
        raise UnsupportedRegimeError("gamma2 = 0 degenerates the constraint to gamma1**2 = 0")

    coeffs = constraint_coefficients(dw, g2)
    candidates = _companion_roots(coeffs)

    scale = max(1.0, dw * dw)
    records = []
    for z in candidates:
        if abs(z.imag) > REALNESS_TOL * max(1.0, abs(z)):
            continue
        g1 = _polish(coeffs, float(z.real))
        sigma = g1 + g2
        res = abs(constraint_residual(g1, dw, g2))
        valid = res <= ROOT_RESIDUAL_TOL * scale and abs(sigma) > SIGMA_GAMMA_MIN
        records.append(RootRecord(g1, sigma, float(res), bool(valid)))
    records.sort(key=lambda r: r.gamma1)
    return GammaRootSet(dw, g2, tuple(records))


# --------------------------------------------------------------------------
# eigenstructure
# --------------------------------------------------------------------------


def eigenvalues_closed_form(params: TwoLevelParams) -> tuple[complex, complex]:
    """``(lambda1, lambda2)``: the complex eigenvalue first, then the real one.

    Only meaningful when ``gamma1`` is a root from :func:`gamma1_roots`.
    """
    w1, g1, w2, g2 = params.omega1, params.gamma1, params.omega2, params.gamma2
    y = g1 + g2
    if y == 0:
        raise SingularParameterError("gamma1 + gamma2 = 0")
    x1 = (w1 * g1 + w2 * g2) / y
    x2 = (w1 * g2 + w2 * g1) / y
    return complex(x1, y), complex(x2, 0.0)


def eigenvectors_closed_form(params: TwoLevelParams) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm right eigenvectors matching :func:`eigenvalues_closed_form`."""
    g1, g2, dw = params.gamma1, params.gamma2, params.delta_omega
    y = g1 + g2
    if g1 == 0 or g2 == 0 or y == 0:
        raise SingularParameterError("closed-form eigenvectors need gamma1, gamma2, gamma1+gamma2 != 0")
    v1 = np.array([y / (g2 * (1j * y - dw)), 1.0], dtype=complex)
    v2 = np.array([1.0, -g1 * (dw + 1j * y) / y], dtype=complex)
    return v1 / np.linalg.norm(v1), v2 / np.linalg.norm(v2)


@dataclass(frozen=True, eq=False)
class Eigenstructure:
    """Eigenvalues with biorthogonally normalized eigenvectors.

    ``right_vectors[i]`` is the unit-norm right eigenvector for
    ``eigenvalues[i]``; ``left_vectors[i]`` is the matching left eigenvector
    as a row, scaled so that ``left_vectors @ right_vectors.T`` is the
    identity. Expansion coefficients of a state are ``left_vectors @ psi``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def coefficients(self, psi) -> np.ndarray:
        return self.left_vectors @ np.asarray(psi, dtype=complex)

    def reconstruct(self, coefficients) -> np.ndarray:
        return self.right_vectors.T @ np.asarray(coefficients, dtype=complex)


def eigenstructure_general(H) -> Eigenstructure:
    """Validated eigendecomposition of a 2x2 or 3x3 matrix.

    Eigenvalues are ordered by ascending real part (ties by imaginary part).

    Raises
    ------
    ExceptionalPointError
        If two eigenvalues are closer than 1e-8, or the decomposition fails
        its residual or biorthogonality checks.
    """
    m = as_square_matrix(H)
    w, v = np.linalg.eig(m)
    n = len(w)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= SEPARATION_TOL:
                raise ExceptionalPointError(
                    f"eigenvalues {w[i]:.6g} and {w[j]:.6g} are not separated (exceptional point)"
                )
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    v = v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    left = np.linalg.inv(v)

    hnorm = max(np.linalg.norm(m, 2), 1.0)
    resid = np.linalg.norm(m @ v - v * w, axis=0)
    if np.any(resid > RESIDUAL_TOL * hnorm):
        raise ExceptionalPointError(f"eigen-residual {resid.max():.3g} too large; ill-conditioned spectrum")
    if np.max(np.abs(left @ v - np.eye(n))) > RESIDUAL_TOL:
        raise ExceptionalPointError("biorthogonal normalization lost precision; near an exceptional point")
    return Eigenstructure(w, v.T.copy(), left)


@dataclass(frozen=True)
class SplitReport:
    """Which eigenvalue is real and whether the complex one decays or grows.

    Indices refer to the ascending-real-part order of :class:`Eigenstructure`.
    ``in_class`` is False when zero or several eigenvalues are real.
    """

    in_class: bool
    real_index: int | None = None
    complex_index: int | None = None
    mode: Literal["decay", "amplify"] | None = None
    rate: float | None = None


def classify_split(es: Eigenstructure, tol: float = REALNESS_TOL) -> SplitReport:
    im = np.asarray(es.eigenvalues).imag
    real = [i for i, x in enumerate(im) if abs(x) <= tol]
    if len(real) != 1 or es.dim != 2:
        return SplitReport(in_class=False)
    r = real[0]
    c = 1 - r
    return SplitReport(True, r, c, "decay" if im[c] < 0 else "amplify", float(im[c]))


def overlap_index(es: Eigenstructure, state: Sequence[complex]) -> int:
    """Index of the right eigenvector with the largest overlap with ``state``."""
    s = np.asarray(state, dtype=complex)
    return int(np.argmax(np.abs(es.right_vectors.conj() @ s)))
