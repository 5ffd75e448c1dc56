"""Exact single-excitation dynamics on the resonator chain.

The chain plus atom amplitudes span a small non-Hermitian Hamiltonian whose
propagation is the independent check for every reduced-model prediction in
this package. Photon loss enters as -i*kappa on resonator diagonals and,
optionally, -i*gamma1/2 on atom diagonals.

The generator splits as M = -K - i*H_r with K a nonnegative damping diagonal
and H_r real symmetric (tridiagonal chain plus scattered coupling entries),
so the state is advanced as split real/imaginary float64 arrays by a
structure-aware fixed-step RK4 kernel. This is bitwise deterministic and
fast enough for chains of several thousand sites at desk scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import AtomGeometry, WaveguideConfig

# RK4 covers the imaginary axis up to |lambda| dt = 2*sqrt(2); stay inside
_STABILITY_LIMIT = 2.8
_HERMITIAN_NORM_CAP = 1.0 + 1e-6
_SELF_CHECK_TOL = 1e-6
_GRID_SNAP_RTOL = 1e-9


class IntegrationError(RuntimeError):
    """Propagation aborted: instability or failed accuracy self-check."""


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeState:
    """Single-excitation amplitudes at one instant.

    Attributes
    ----------
    atom_amp : complex ndarray, one entry per atom
    site_amp : complex ndarray, one entry per resonator
    time : float
    """

    atom_amp: np.ndarray
    site_amp: np.ndarray
    time: float

    @property
    def norm2(self) -> float:
        """Total squared norm; conserved when nothing is lossy."""
        return float(np.sum(np.abs(self.atom_amp) ** 2) + np.sum(np.abs(self.site_amp) ** 2))


@dataclass(frozen=True)
class SparseHamiltonian:
    """Sparse single-excitation Hamiltonian in the rotating (gauged) frame.

    Entries are COO triples (row, col, value) of the full matrix with the
    band center subtracted from every diagonal; `omega_gauge` records the
    subtraction. Rows 0..n_sites-1 are resonators, then one row per atom.
    """

    dimension: int
    entries: tuple[tuple[int, int, complex], ...]
    is_hermitian: bool
    n_sites: int
    n_atoms: int
    omega_gauge: float

    @property
    def n_hopping_bonds(self) -> int:
        return sum(
            1 for r, c, _ in self.entries
            if r < c and c < self.n_sites
        )

    @property
    def n_coupling_points(self) -> int:
        return sum(
            1 for r, c, _ in self.entries
            if r < c and c >= self.n_sites
        )


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def center_geometry(geom: AtomGeometry, n_sites: int) -> AtomGeometry:
    """Translate all connection sites so the layout midpoint sits at n_sites//2.

    Keeps edge reflections from reaching the atoms within the simulated
    window on an open chain.
    """
    sites = geom.all_sites()
    mid = (min(sites) + max(sites)) // 2
    shift = n_sites // 2 - mid
    moved = tuple(
        type(a)(a.omega, a.g, tuple(s + shift for s in a.sites), a.gamma1, a.gamma2)
        for a in geom.atoms
    )
    return AtomGeometry(moved)


def build_hamiltonian(
    w: WaveguideConfig,
    geom: AtomGeometry,
    include_intrinsic: bool = False,
) -> SparseHamiltonian:
    """Assemble the chain + atoms Hamiltonian with open boundaries.

    Hopping -xi between neighbors, coupling g from each atom to its two
    connection sites, -i*kappa on every resonator diagonal, and, when
    `include_intrinsic` is set, -i*gamma1/2 on each atom diagonal. The
    band center omega_c is subtracted from all diagonals (pure gauge).

    Warns when a connection site sits close enough to an open end that
    reflections could reach it early.
    """
    n_sites = w.n_sites
    for idx, atom in enumerate(geom.atoms):
        bad = [s for s in atom.sites if not 0 <= s < n_sites]
        if bad:
            raise ValueError(
                f"atom {idx} connection sites {bad} outside chain of {n_sites} sites"
            )

    margin = max(2, n_sites // 20)
    edge = min(min(s, n_sites - 1 - s) for s in geom.all_sites())
    if edge < margin:
        warnings.warn(
            f"connection site within {edge} sites of an open end "
            f"(margin {margin}); reflections may contaminate long runs",
            stacklevel=2,
        )

    entries: list[tuple[int, int, complex]] = []
    for i in range(n_sites - 1):
        entries.append((i, i + 1, complex(-w.xi)))
        entries.append((i + 1, i, complex(-w.xi)))
    if w.kappa > 0.0:
        for i in range(n_sites):
            entries.append((i, i, complex(0.0, -w.kappa)))

    any_intrinsic = False
    for a_idx, atom in enumerate(geom.atoms):
        row = n_sites + a_idx
        diag = complex(atom.omega - w.omega_c)
        if include_intrinsic and atom.gamma1 > 0.0:
            diag += complex(0.0, -atom.gamma1 / 2.0)
            any_intrinsic = True
        if diag != 0.0:
            entries.append((row, row, diag))
        for s in atom.sites:
            entries.append((row, s, complex(atom.g)))
            entries.append((s, row, complex(atom.g)))

    return SparseHamiltonian(
        dimension=n_sites + geom.n_atoms,
        entries=tuple(entries),
        is_hermitian=(w.kappa == 0.0 and not any_intrinsic),
        n_sites=n_sites,
        n_atoms=geom.n_atoms,
        omega_gauge=w.omega_c,
    )


def excited_state(h: SparseHamiltonian, which_atom: int = 0) -> LatticeState:
    """Initial state: one atom excited, chain in vacuum, at time zero."""
    if not 0 <= which_atom < h.n_atoms:
        raise ValueError(f"atom index {which_atom} out of range for {h.n_atoms} atom(s)")
    atom_amp = np.zeros(h.n_atoms, dtype=np.complex128)
    atom_amp[which_atom] = 1.0
    return LatticeState(atom_amp=atom_amp, site_amp=np.zeros(h.n_sites, dtype=np.complex128), time=0.0)


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _sym_apply(y, out, hop, diag_r, crow, ccol, cval, n_sites):
    # out = H_r @ y, exploiting the tridiagonal chain block
    out[0] = diag_r[0] * y[0] + hop * y[1]
    for i in range(1, n_sites - 1):
        out[i] = diag_r[i] * y[i] + hop * (y[i - 1] + y[i + 1])
    out[n_sites - 1] = diag_r[n_sites - 1] * y[n_sites - 1] + hop * y[n_sites - 2]
    for i in range(n_sites, y.shape[0]):
        out[i] = diag_r[i] * y[i]
    for e in range(crow.shape[0]):
        r, c, v = crow[e], ccol[e], cval[e]
        out[r] += v * y[c]
        out[c] += v * y[r]


@njit(cache=True)
def _rk4_run(yr, yi, damp, diag_r, hop, crow, ccol, cval, n_sites,
             dt, steps_per_segment, rec_r, rec_i, abort_ratio):
    """Advance (yr, yi) through all grid segments, recording at segment ends.

    dyr/dt = -damp*yr + H_r@yi ; dyi/dt = -damp*yi - H_r@yr.
    Returns (max step norm ratio, segments completed, ok flag).
    """
    dim = yr.shape[0]
    k1r = np.empty(dim); k1i = np.empty(dim)
    k2r = np.empty(dim); k2i = np.empty(dim)
    k3r = np.empty(dim); k3i = np.empty(dim)
    k4r = np.empty(dim); k4i = np.empty(dim)
    tr = np.empty(dim); ti = np.empty(dim)
    hr = np.empty(dim)

    max_ratio = 0.0
    for seg in range(steps_per_segment.shape[0]):
        for _ in range(steps_per_segment[seg]):
            n0 = 0.0
            for i in range(dim):
                n0 += yr[i] * yr[i] + yi[i] * yi[i]

            _sym_apply(yi, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k1r[i] = -damp[i] * yr[i] + hr[i]
            _sym_apply(yr, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k1i[i] = -damp[i] * yi[i] - hr[i]

            for i in range(dim):
                tr[i] = yr[i] + 0.5 * dt * k1r[i]
                ti[i] = yi[i] + 0.5 * dt * k1i[i]
            _sym_apply(ti, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k2r[i] = -damp[i] * tr[i] + hr[i]
            _sym_apply(tr, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k2i[i] = -damp[i] * ti[i] - hr[i]

            for i in range(dim):
                tr[i] = yr[i] + 0.5 * dt * k2r[i]
                ti[i] = yi[i] + 0.5 * dt * k2i[i]
            _sym_apply(ti, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k3r[i] = -damp[i] * tr[i] + hr[i]
            _sym_apply(tr, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k3i[i] = -damp[i] * ti[i] - hr[i]

            for i in range(dim):
                tr[i] = yr[i] + dt * k3r[i]
                ti[i] = yi[i] + dt * k3i[i]
            _sym_apply(ti, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k4r[i] = -damp[i] * tr[i] + hr[i]
            _sym_apply(tr, hr, hop, diag_r, crow, ccol, cval, n_sites)
            for i in range(dim):
                k4i[i] = -damp[i] * ti[i] - hr[i]

            sixth = dt / 6.0
            n1 = 0.0
            for i in range(dim):
                yr[i] += sixth * (k1r[i] + 2.0 * (k2r[i] + k3r[i]) + k4r[i])
                yi[i] += sixth * (k1i[i] + 2.0 * (k2i[i] + k3i[i]) + k4i[i])
                n1 += yr[i] * yr[i] + yi[i] * yi[i]

            if n0 > 0.0:
                ratio = n1 / n0
                if ratio > max_ratio:
                    max_ratio = ratio
                if ratio > abort_ratio:
                    return max_ratio, seg, False

        for i in range(dim):
            rec_r[seg, i] = yr[i]
            rec_i[seg, i] = yi[i]

    return max_ratio, steps_per_segment.shape[0], True


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def _kernel_arrays(h: SparseHamiltonian):
    """Split the COO entries into the structured kernel inputs."""
    diag_r = np.zeros(h.dimension)
    damp = np.zeros(h.dimension)
    hop = 0.0
    crow, ccol, cval = [], [], []
    for r, c, v in h.entries:
        if r == c:
            diag_r[r] = v.real
            damp[r] = -v.imag
        elif r < h.n_sites and c < h.n_sites:
            hop = v.real   # uniform nearest-neighbor bond
        elif r < c:
            crow.append(r)
            ccol.append(c)
            cval.append(v.real)
    return (
        damp,
        diag_r,
        hop,
        np.asarray(crow, dtype=np.int64),
        np.asarray(ccol, dtype=np.int64),
        np.asarray(cval, dtype=np.float64),
    )


def _gershgorin(h: SparseHamiltonian) -> float:
    row_sums = np.zeros(h.dimension)
    for r, _, v in h.entries:
        row_sums[r] += abs(v)
    return float(row_sums.max())


def _segment_steps(t0: float, t_grid: np.ndarray, dt: float) -> np.ndarray:
    times = np.concatenate(([t0], t_grid))
    steps = np.empty(len(t_grid), dtype=np.int64)
    for i in range(len(t_grid)):
        span = times[i + 1] - times[i]
        if span < 0:
            raise ValueError("t_grid must be ascending and start at or after the state time")
        n = int(round(span / dt)) if span > 0 else 0
        if abs(span - n * dt) > _GRID_SNAP_RTOL * max(1.0, abs(span)):
            raise ValueError(
                f"grid spacing {span!r} is not an integer multiple of dt={dt!r}"
            )
        steps[i] = n
    return steps


def propagate(
    h: SparseHamiltonian,
    psi0: LatticeState,
    t_grid,
    dt: float | None = None,
    self_check: bool = False,
) -> list[LatticeState]:
    """Fixed-step RK4 propagation of dpsi/dt = -i H psi, sampled on t_grid.

    Parameters
    ----------
    dt : step size; defaults to 0.005 in units of the inverse hop rate.
        Must divide every grid spacing.
    self_check : rerun at dt/2 and require max amplitude agreement 1e-6.

    Raises
    ------
    IntegrationError
        On norm growth beyond 1e-6 for a lossless Hamiltonian, on numerical
        blow-up for a lossy one, or on a failed self-check.
    """
    damp, diag_r, hop, crow, ccol, cval = _kernel_arrays(h)
    xi = -hop
    if dt is None:
        dt = 0.005 / xi
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt * _gershgorin(h) >= _STABILITY_LIMIT:
        raise ValueError(
            f"dt={dt} puts the spectrum outside the RK4 stability region; "
            f"need dt < {_STABILITY_LIMIT / _gershgorin(h):.3g}"
        )

    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly ascending")
    steps = _segment_steps(psi0.time, t_grid, dt)

    if len(psi0.atom_amp) != h.n_atoms or len(psi0.site_amp) != h.n_sites:
        raise ValueError("state shape does not match the Hamiltonian layout")

    y0 = np.concatenate((psi0.site_amp, psi0.atom_amp)).astype(np.complex128)
    rec_r, rec_i = _run(h, y0, damp, diag_r, hop, crow, ccol, cval, dt, steps)

    if self_check:
        rec_r2, rec_i2 = _run(h, y0, damp, diag_r, hop, crow, ccol, cval, dt / 2.0, steps * 2)
        err = max(
            float(np.max(np.abs(rec_r - rec_r2))),
            float(np.max(np.abs(rec_i - rec_i2))),
        )
        if err > _SELF_CHECK_TOL:
            raise IntegrationError(
                f"self-check failed: dt vs dt/2 amplitudes differ by {err:.3e}"
            )

    out = []
    for k, t in enumerate(t_grid):
        amps = rec_r[k] + 1j * rec_i[k]
        out.append(
            LatticeState(
                atom_amp=amps[h.n_sites:].copy(),
                site_amp=amps[:h.n_sites].copy(),
                time=float(t),
            )
        )
    return out


def _run(h, y0, damp, diag_r, hop, crow, ccol, cval, dt, steps):
    rec_r = np.empty((len(steps), h.dimension))
    rec_i = np.empty((len(steps), h.dimension))
    yr = np.ascontiguousarray(y0.real)
    yi = np.ascontiguousarray(y0.imag)
    abort_ratio = _HERMITIAN_NORM_CAP if h.is_hermitian else 1e12
    max_ratio, done, ok = _rk4_run(
        yr, yi, damp, diag_r, hop, crow, ccol, cval, h.n_sites,
        dt, steps, rec_r, rec_i, abort_ratio,
    )
    if not ok:
        kind = "norm growth on a lossless run" if h.is_hermitian else "numerical blow-up"
        raise IntegrationError(
            f"unstable propagation ({kind}): step norm ratio {max_ratio:.6g} "
            f"after segment {done}"
        )
    return rec_r, rec_i


def atom_population(states: list[LatticeState], which_atom: int = 0) -> np.ndarray:
    """|atom amplitude|^2 per grid point for one atom."""
    if not states:
        return np.zeros(0)
    if not 0 <= which_atom < len(states[0].atom_amp):
        raise ValueError(f"atom index {which_atom} out of range")
    return np.array([abs(s.atom_amp[which_atom]) ** 2 for s in states])


def total_norm(states: list[LatticeState]) -> np.ndarray:
    """Total squared norm per grid point."""
    return np.array([s.norm2 for s in states])
