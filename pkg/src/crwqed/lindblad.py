"""Reduced master equations for one and two emitters, with closed forms.

Basis conventions, fixed throughout the package:
  one atom: |g>, |e|                  (index 1 is excited)
  two atoms: |gg>, |ge>, |eg>, |ee>   (index = 2*atom1 + atom2, e = 1)

Density matrices are plain complex ndarrays in these bases. Vectorization
uses column stacking, so vec(A rho B) = (B^T kron A) vec(rho).

The two-atom generator combines the waveguide-induced rates (collective and
individual dissipation, Lamb shifts, coherent exchange) with optional
intrinsic decay and pure dephasing per atom. The closed-form excitation
probabilities and the transmission implement the exponential-pair solution
of the two-level block; two misprints in the source expressions (a squared
denominator and a missing square root in an exponent) are corrected here and
pinned against the master-equation integrator by the tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import RateTable

_TRACE_TOL = 1e-9
_HERM_TOL = 1e-12
_POSITIVITY_FLOOR = -1e-6
_SELF_CHECK_TOL = 1e-8
_IMAG_RESIDUE_TOL = 1e-12

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_SIGMA_PLUS = _SIGMA_MINUS.conj().T
_SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
_ID2 = np.eye(2, dtype=complex)
_NUM = _SIGMA_PLUS @ _SIGMA_MINUS   # |e><e|


class EvolutionError(RuntimeError):
    """Density-matrix evolution aborted (positivity or trace violation)."""


class PTPhase(Enum):
    """Spectral phase of the effective two-level non-Hermitian block."""

    SYMMETRIC = "symmetric"
    EXCEPTIONAL_POINT = "exceptional-point"
    BROKEN = "broken"


# ---------------------------------------------------------------------------
# basis helpers
# ---------------------------------------------------------------------------

_TWO_ATOM_LABELS = ("gg", "ge", "eg", "ee")


def basis_ket(label: str) -> np.ndarray:
    """Two-atom computational basis vector for label in gg/ge/eg/ee."""
    if label not in _TWO_ATOM_LABELS:
        raise ValueError(f"unknown basis label {label!r}")
    v = np.zeros(4, dtype=complex)
    v[_TWO_ATOM_LABELS.index(label)] = 1.0
    return v


def pure_density(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def bell_target() -> np.ndarray:
    """(|eg> - i|ge>)/sqrt(2), the state reached by a quarter exchange cycle."""
    return (basis_ket("eg") - 1j * basis_ket("ge")) / math.sqrt(2.0)


def excited_population(rhos, which_atom: int) -> np.ndarray:
    """Excitation probability of one atom along a density-matrix series."""
    if which_atom not in (0, 1):
        raise ValueError("which_atom must be 0 or 1")
    if which_atom == 0:
        return np.array([float((r[2, 2] + r[3, 3]).real) for r in rhos])
    return np.array([float((r[1, 1] + r[3, 3]).real) for r in rhos])


def _check_density(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix must be {dim}x{dim}")
    if np.max(np.abs(rho - rho.conj().T)) > _HERM_TOL:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > _TRACE_TOL:
        raise ValueError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < _POSITIVITY_FLOOR:
        raise ValueError("density matrix has a significantly negative eigenvalue")
    return rho


# ---------------------------------------------------------------------------
# two-atom rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoAtomRates:
    """All rates entering the two-atom generator, as angular frequencies.

    gamma11/gamma22/gamma12 and u11/u22/u12 are the waveguide-induced
    dissipative and coherent rates; gamma1 and gamma2 are intrinsic decay
    and pure dephasing applied identically to both atoms.
    """

    gamma11: float
    gamma22: float
    gamma12: float = 0.0
    u11: float = 0.0
    u22: float = 0.0
    u12: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self):
        if self.gamma11 < 0 or self.gamma22 < 0:
            raise ValueError("diagonal dissipation rates must be nonnegative")
        scale = max(1.0, self.gamma11, self.gamma22) ** 2
        if self.gamma11 * self.gamma22 - self.gamma12 ** 2 < -1e-12 * scale:
            raise ValueError(
                "dissipation matrix [[g11,g12],[g12,g22]] is not positive semidefinite"
            )
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("intrinsic rates must be nonnegative")

    @property
    def j_eff(self) -> float:
        return self.u12 / 2.0

    @classmethod
    def from_rate_table(cls, table: RateTable, gamma1: float = 0.0, gamma2: float = 0.0):
        return cls(
            gamma11=table.gamma[0][0],
            gamma22=table.gamma[1][1],
            gamma12=table.gamma[0][1],
            u11=table.u[0][0],
            u22=table.u[1][1],
            u12=table.u[0][1],
            gamma1=gamma1,
            gamma2=gamma2,
        )


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _commutator_part(h: np.ndarray) -> np.ndarray:
    dim = h.shape[0]
    eye = np.eye(dim, dtype=complex)
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def _jump_part(left: np.ndarray, right: np.ndarray, rate: float) -> np.ndarray:
    """rate * (L rho R - {R L, rho}/2) in column-stacked form."""
    dim = left.shape[0]
    eye = np.eye(dim, dtype=complex)
    rl = right @ left
    return rate * (
        np.kron(right.T, left)
        - 0.5 * np.kron(eye, rl)
        - 0.5 * np.kron(rl.T, eye)
    )


def _single_atom_liouvillian(a: complex) -> np.ndarray:
    h = a.imag * _NUM   # Lamb shift in the frame rotating at the bare frequency
    return _commutator_part(h) + _jump_part(_SIGMA_MINUS, _SIGMA_PLUS, 2.0 * a.real)


def _site_op(op: np.ndarray, which: int) -> np.ndarray:
    return np.kron(op, _ID2) if which == 0 else np.kron(_ID2, op)


def build_liouvillian(r: TwoAtomRates) -> np.ndarray:
    """Dense 16x16 generator for the two-atom master equation."""
    sm = [_site_op(_SIGMA_MINUS, i) for i in (0, 1)]
    sp = [_site_op(_SIGMA_PLUS, i) for i in (0, 1)]
    sz = [_site_op(_SIGMA_Z, i) for i in (0, 1)]
    num = [_site_op(_NUM, i) for i in (0, 1)]

    h = (
        0.5 * r.u11 * num[0]
        + 0.5 * r.u22 * num[1]
        + 0.5 * r.u12 * (sp[0] @ sm[1] + sp[1] @ sm[0])
    )
    L = _commutator_part(h)

    gam = ((r.gamma11, r.gamma12), (r.gamma12, r.gamma22))
    for i in (0, 1):
        for j in (0, 1):
            if gam[i][j] != 0.0:
                L += _jump_part(sm[j], sp[i], gam[i][j])

    for i in (0, 1):
        if r.gamma1 != 0.0:
            L += _jump_part(sm[i], sp[i], r.gamma1)
        if r.gamma2 != 0.0:
            # sigma_z dephasing: populations untouched, coherences decay
            L += 0.5 * r.gamma2 * (
                np.kron(sz[i].T, sz[i]) - np.eye(16, dtype=complex)
            )
    return L


# ---------------------------------------------------------------------------
# fixed-step evolution
# ---------------------------------------------------------------------------

def _rk4_density(L: np.ndarray, rho0: np.ndarray, t_grid: np.ndarray,
                 dt_target: float) -> list[np.ndarray]:
    dim = rho0.shape[0]
    rho = rho0.copy()
    out = []
    t_prev = 0.0
    trace0 = float(np.trace(rho0).real)
    for t in t_grid:
        span = t - t_prev
        if span > 0:
            n = max(1, int(math.ceil(span / dt_target - 1e-12)))
            dt = span / n
            for _ in range(n):
                y = rho.reshape(-1, order="F")
                k1 = L @ y
                k2 = L @ (y + 0.5 * dt * k1)
                k3 = L @ (y + 0.5 * dt * k2)
                k4 = L @ (y + dt * k3)
                y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
                rho = y.reshape((dim, dim), order="F")
                rho = 0.5 * (rho + rho.conj().T)   # re-Hermitize every step
        t_prev = t

        if abs(float(np.trace(rho).real) - trace0) > _TRACE_TOL:
            raise EvolutionError(f"trace drifted beyond {_TRACE_TOL} at t={t}")
        if np.linalg.eigvalsh(rho).min() < _POSITIVITY_FLOOR:
            raise EvolutionError(f"negative eigenvalue beyond {_POSITIVITY_FLOOR} at t={t}")
        out.append(rho.copy())
    return out


def _checked_grid(t_grid) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be nonnegative and strictly ascending")
    return t_grid


def _default_dt(L: np.ndarray) -> float:
    scale = float(np.max(np.abs(L)))
    return 1e-3 / scale if scale > 0 else 1.0


def evolve_density(
    L: np.ndarray,
    rho0: np.ndarray,
    t_grid,
    dt: float | None = None,
    self_check: bool = False,
) -> list[np.ndarray]:
    """Integrate drho/dt = L[rho] on a time grid with fixed-step RK4.

    The state is re-Hermitized every step; trace and positivity are
    enforced at every grid point. `self_check` reruns at half step and
    requires agreement within 1e-8.
    """
    dim = int(round(math.sqrt(L.shape[0])))
    if L.shape != (dim * dim, dim * dim):
        raise ValueError("generator must be a square matrix over vectorized states")
    rho0 = _check_density(rho0, dim)
    t_grid = _checked_grid(t_grid)
    if dt is None:
        dt = _default_dt(L)
    if dt <= 0:
        raise ValueError("dt must be positive")

    out = _rk4_density(L, rho0, t_grid, dt)
    if self_check:
        ref = _rk4_density(L, rho0, t_grid, dt / 2.0)
        err = max(float(np.max(np.abs(a - b))) for a, b in zip(out, ref))
        if err > _SELF_CHECK_TOL:
            raise EvolutionError(f"self-check failed: dt vs dt/2 differ by {err:.3e}")
    return out


def single_atom_evolve(a: complex, rho0: np.ndarray, t_grid, dt: float | None = None) -> list[np.ndarray]:
    """Evolve one atom under its waveguide-induced complex coefficient.

    The real part sets the decay rate 2 Re(a); the imaginary part is the
    frequency shift. Re(a) < 0 is rejected as an unphysical generator.
    """
    a = complex(a)
    if a.real < 0:
        raise ValueError("coefficient with negative real part: unphysical decay")
    return evolve_density(_single_atom_liouvillian(a), rho0, t_grid, dt=dt)


def markov_pe(a: complex, t) -> np.ndarray:
    """Closed-form excited population e^(-2 Re(a) t) from full excitation."""
    return np.exp(-2.0 * complex(a).real * np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# fidelity
# ---------------------------------------------------------------------------

def bell_fidelity(rho: np.ndarray) -> float:
    """sqrt of the overlap with (|eg> - i|ge>)/sqrt(2)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("bell_fidelity needs a two-atom density matrix")
    psi = bell_target()
    val = float(np.real(psi.conj() @ rho @ psi))
    return math.sqrt(max(val, 0.0))


def fidelity_linear_estimate(gamma1: float, gamma2: float, j_eff: float) -> float:
    """First-order fidelity loss over the quarter exchange cycle.

    Decay costs pi*gamma1/(8 j_eff), dephasing pi*gamma2/(16 j_eff): each
    rate acts for t = pi/(4 j_eff) on a state that is, on average, half
    excited (decay) and half coherent (dephasing halves again).
    """
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("rates must be nonnegative")
    if j_eff <= 0:
        raise ValueError("j_eff must be positive")
    return 1.0 - math.pi * gamma1 / (8.0 * j_eff) - math.pi * gamma2 / (16.0 * j_eff)


# ---------------------------------------------------------------------------
# closed-form two-atom dynamics
# ---------------------------------------------------------------------------

def _closed_form_inputs(r: TwoAtomRates):
    if r.gamma12 != 0.0 or r.u11 != 0.0 or r.u22 != 0.0:
        raise ValueError("closed forms assume gamma12 = u11 = u22 = 0")
    if r.gamma1 != 0.0 or r.gamma2 != 0.0:
        raise ValueError("closed forms assume no intrinsic decay or dephasing")
    delta = r.gamma11 + r.gamma22
    big_delta = r.gamma11 - r.gamma22
    j = r.j_eff
    # written so that |big_delta| = 4j gives K = 0.0 exactly in floats
    k = big_delta * big_delta - 16.0 * (j * j)
    return delta, big_delta, j, k


def _real_checked(values: np.ndarray, scalar: bool):
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > _IMAG_RESIDUE_TOL:
        raise AssertionError(f"imaginary residue {residue:.3e} in closed form")
    out = values.real
    return float(out[0]) if scalar else out


def _closed_pair(t, r: TwoAtomRates, sign: float):
    delta, big_delta, j, k = _closed_form_inputs(r)
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t).astype(complex)
    envelope = np.exp(-delta * tt / 2.0)
    if k == 0.0:
        vals = envelope * (1.0 + sign * big_delta * tt / 2.0 + (j * tt) ** 2)
    else:
        sk = cmath.sqrt(complex(k))
        em = np.exp(-sk * tt / 2.0)
        ep = np.exp(sk * tt / 2.0)
        m_plus = em + ep
        m_minus = em - ep
        vals = (envelope / (2.0 * k)) * (
            (big_delta ** 2 - 8.0 * j * j) * m_plus
            - sign * sk * big_delta * m_minus
            - 16.0 * j * j
        )
    return _real_checked(vals, scalar)


def p1_closed(t, r: TwoAtomRates):
    """Excitation of the initially excited atom; exact two-level solution."""
    return _closed_pair(t, r, sign=-1.0)


def p2_closed(t, r: TwoAtomRates):
    """Same dynamics started from the other atom (swapped rate asymmetry)."""
    return _closed_pair(t, r, sign=+1.0)


def transmission_closed(t, r: TwoAtomRates):
    """Probability transferred to the other atom; swap-symmetric by form."""
    delta, _, j, k = _closed_form_inputs(r)
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t).astype(complex)
    envelope = np.exp(-delta * tt / 2.0)
    if k == 0.0:
        vals = envelope * (j * tt) ** 2
    else:
        sk = cmath.sqrt(complex(k))
        vals = (4.0 * j * j / k) * envelope * (np.exp(sk * tt / 2.0) + np.exp(-sk * tt / 2.0) - 2.0)
    return _real_checked(vals, scalar)


# ---------------------------------------------------------------------------
# spectral phase of the effective two-level block
# ---------------------------------------------------------------------------

def pt_eigenfrequencies(gamma11: float, gamma22: float, j_eff: float):
    """Eigenfrequencies -i(G11+G22)/4 +- sqrt(-K)/4 and their phase tag.

    K < 0: common linewidth, split real frequencies (symmetric phase).
    K = 0: coalescence (exceptional point).
    K > 0: common frequency, split linewidths (broken phase).
    """
    if gamma11 < 0 or gamma22 < 0:
        raise ValueError("dissipation rates must be nonnegative")
    delta = gamma11 + gamma22
    big_delta = gamma11 - gamma22
    k = big_delta * big_delta - 16.0 * (j_eff * j_eff)
    root = cmath.sqrt(complex(-k))
    w_plus = -0.25j * delta + 0.25 * root
    w_minus = -0.25j * delta - 0.25 * root
    if k < 0.0:
        phase = PTPhase.SYMMETRIC
    elif k == 0.0:
        phase = PTPhase.EXCEPTIONAL_POINT
    else:
        phase = PTPhase.BROKEN
    return w_plus, w_minus, phase
