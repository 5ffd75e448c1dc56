"""Exact emitter-waveguide rate algebra for two-site emitters on a resonator chain.

An emitter that couples to a tight-binding resonator chain at two separate
sites interferes with itself.  When the emitter is resonant with the band
center, every waveguide-induced rate reduces to a sum of fourth roots of
unity, so the whole rate table can be carried as Gaussian integers in units
of g^2/(2 xi) and evaluated without any floating-point error.  This module
implements that algebra: single-emitter and cross-emitter coefficients,
regime classification, connection-point topology, and an exhaustive search
over canonical two-emitter layouts.

Conventions
-----------
* Chain dispersion: omega(k) = omega_c - 2 xi cos(k), k in (-pi, pi].
* A site-separation of d contributes a phase factor i^(|d| mod 4).
* ``ExactCoefficient`` stores a complex coefficient as integer multiples of
  g^2 / (2 xi).  Dissipative rates are twice the real part, coherent shifts
  twice the imaginary part, so both come out as integer multiples of
  g^2 / xi.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from math import cos
from typing import Optional

__all__ = [
    "Atom",
    "AtomGeometry",
    "ExactCoefficient",
    "RateCondition",
    "RateConstraint",
    "RateTable",
    "SearchHit",
    "SingleAtomClass",
    "Topology",
    "WaveguideConfig",
    "classify_single",
    "classify_topology",
    "coefficient_matrix",
    "dispersion",
    "phase_unit",
    "search_geometries",
    "single_atom_coefficient",
]

# Relative tolerance for "exactly resonant" checks on float inputs.
_RESONANCE_RTOL = 1e-12


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveguideConfig:
    """Tight-binding resonator chain.

    Parameters
    ----------
    omega_c : float
        Bare resonator frequency (band center).  Only enters as a reference
        for resonance checks and as the diagonal gauge of the lattice
        Hamiltonian.
    xi : float
        Nearest-neighbor hopping rate; must be positive.  The band spans
        omega_c +- 2 xi.
    kappa : float
        Uniform resonator loss rate, >= 0.
    n_sites : int
        Chain length, >= 3.
    """

    omega_c: float
    xi: float
    kappa: float = 0.0
    n_sites: int = 4000

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.n_sites < 3:
            raise ValueError(f"n_sites must be >= 3, got {self.n_sites}")


@dataclass(frozen=True)
class Atom:
    """A two-level emitter attached to the chain at two distinct sites."""

    omega: float
    g: float
    sites: tuple[int, int]
    gamma1: float = 0.0   # intrinsic energy decay
    gamma2: float = 0.0   # intrinsic pure dephasing

    def __post_init__(self):
        if not self.g >= 0:
            raise ValueError(f"coupling g must be nonnegative, got {self.g}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("intrinsic rates gamma1/gamma2 must be >= 0")
        sites = tuple(int(s) for s in self.sites)
        if len(sites) != 2 or sites[0] == sites[1]:
            raise ValueError(f"an atom needs two distinct sites, got {self.sites}")
        object.__setattr__(self, "sites", sites)

    @property
    def span(self) -> int:
        """Distance between the two connection points."""
        return abs(self.sites[1] - self.sites[0])


@dataclass(frozen=True)
class AtomGeometry:
    """One or two emitters and where they attach to the chain."""

    atoms: tuple[Atom, ...]

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if len(atoms) not in (1, 2):
            raise ValueError(f"expected 1 or 2 atoms, got {len(atoms)}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def single(cls, omega: float, g: float, sites: tuple[int, int],
               gamma1: float = 0.0, gamma2: float = 0.0) -> "AtomGeometry":
        return cls((Atom(omega, g, sites, gamma1, gamma2),))

    @classmethod
    def pair(cls, omega: float, g: float, sites_a: tuple[int, int],
             sites_b: tuple[int, int], gamma1: float = 0.0,
             gamma2: float = 0.0) -> "AtomGeometry":
        return cls((Atom(omega, g, sites_a, gamma1, gamma2),
                    Atom(omega, g, sites_b, gamma1, gamma2)))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def all_sites(self) -> tuple[int, ...]:
        return tuple(s for atom in self.atoms for s in atom.sites)


def require_resonant(geom: AtomGeometry, waveguide: WaveguideConfig) -> None:
    """Raise unless every emitter sits exactly at the band center.

    All Markov-level results in this package assume omega == omega_c; the
    check uses a relative tolerance so that configs built from parsed floats
    still count as resonant.
    """
    scale = max(abs(waveguide.omega_c), waveguide.xi, 1.0)
    for i, atom in enumerate(geom.atoms):
        if abs(atom.omega - waveguide.omega_c) > _RESONANCE_RTOL * scale:
            raise ValueError(
                f"atom {i} is off-resonant (omega={atom.omega}, "
                f"omega_c={waveguide.omega_c}); rate formulas require resonance")


# ---------------------------------------------------------------------------
# exact coefficient algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactCoefficient:
    """Complex coefficient stored as Gaussian-integer units of g^2/(2 xi).

    The value represented is (re_units + i * im_units) * g^2 / (2 xi).
    Addition and integer scaling stay exact; floats only appear when
    :meth:`value` materializes the coefficient for a concrete g and xi.
    """

    re_units: int
    im_units: int

    def __post_init__(self):
        if not isinstance(self.re_units, int) or not isinstance(self.im_units, int):
            raise TypeError("ExactCoefficient units must be ints")

    def __add__(self, other: "ExactCoefficient") -> "ExactCoefficient":
        return ExactCoefficient(self.re_units + other.re_units,
                                self.im_units + other.im_units)

    def __mul__(self, n: int) -> "ExactCoefficient":
        return ExactCoefficient(self.re_units * n, self.im_units * n)

    __rmul__ = __mul__

    @property
    def is_zero(self) -> bool:
        return self.re_units == 0 and self.im_units == 0

    def value(self, g: float, xi: float) -> complex:
        """Materialize as a complex number for concrete coupling and hopping."""
        scale = g * g / (2.0 * xi)
        return complex(self.re_units * scale, self.im_units * scale)


_PHASE_UNITS = (
    ExactCoefficient(1, 0),    # i^0
    ExactCoefficient(0, 1),    # i^1
    ExactCoefficient(-1, 0),   # i^2
    ExactCoefficient(0, -1),   # i^3
)


def phase_unit(d: int) -> ExactCoefficient:
    """Phase factor i^(|d| mod 4) contributed by a site separation of d."""
    return _PHASE_UNITS[abs(int(d)) % 4]


def single_atom_coefficient(n_span: int, g: float, xi: float) -> ExactCoefficient:
    """Waveguide-induced coefficient of a single resonant two-site emitter.

    The emitter's decay rate is twice the real part and its level shift is
    twice the imaginary part of the returned coefficient.  In units of
    g^2/(2 xi) the coefficient is 2 * (1 + i^(n_span mod 4)), so span
    n_span = 2 (mod 4) is exactly decoherence-free.

    Parameters
    ----------
    n_span : int
        Separation of the two connection points, >= 1.
    g, xi : float
        Coupling and hopping; validated positive.  They do not change the
        integer units, only the materialized value.
    """
    if n_span < 1:
        raise ValueError(f"n_span must be >= 1, got {n_span}")
    if not g > 0 or not xi > 0:
        raise ValueError("g and xi must be positive")
    u = phase_unit(n_span)
    return ExactCoefficient(2 * (1 + u.re_units), 2 * u.im_units)


def _pair_coefficient(sites_a: tuple[int, int], sites_b: tuple[int, int]) -> ExactCoefficient:
    # Cross coefficient: one phase unit per connection-point pair.
    total = ExactCoefficient(0, 0)
    for n in sites_a:
        for m in sites_b:
            total = total + phase_unit(n - m)
    return total


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

class SingleAtomClass(Enum):
    """Regime of a single two-site emitter, by span mod 4."""

    DECOHERENCE_FREE = "decoherence-free"   # span = 2 (mod 4): coefficient vanishes
    SMALL_ATOM_LIKE = "small-atom-like"     # span = 0 (mod 4): pure decay, no shift
    LAMB_SHIFTED = "lamb-shifted"           # odd span: decay plus level shift


class Topology(Enum):
    """How the connection points of two emitters interleave on the chain."""

    SEPARATE = "separate"
    NESTED = "nested"
    BRAIDED = "braided"


def classify_single(n_span: int) -> SingleAtomClass:
    """Classify a single emitter by its connection-point separation."""
    if n_span < 1:
        raise ValueError(f"n_span must be >= 1, got {n_span}")
    r = n_span % 4
    if r == 2:
        return SingleAtomClass.DECOHERENCE_FREE
    if r == 0:
        return SingleAtomClass.SMALL_ATOM_LIKE
    return SingleAtomClass.LAMB_SHIFTED


def classify_topology(geom: AtomGeometry) -> Topology:
    """Classify a two-emitter layout as separate, nested, or braided.

    Requires all four connection points to be distinct; a shared site has
    no defined topology.
    """
    if geom.n_atoms != 2:
        raise ValueError("topology is defined for exactly two atoms")
    a = sorted(geom.atoms[0].sites)
    b = sorted(geom.atoms[1].sites)
    if len({*a, *b}) != 4:
        raise ValueError(f"atoms share a connection site: {a} vs {b}")
    if a[1] < b[0] or b[1] < a[0]:
        return Topology.SEPARATE
    if (a[0] < b[0] and b[1] < a[1]) or (b[0] < a[0] and a[1] < b[1]):
        return Topology.NESTED
    return Topology.BRAIDED


# ---------------------------------------------------------------------------
# two-atom rate table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateTable:
    """Exact waveguide-induced coefficient matrix for a resonant emitter pair.

    ``a11``/``a22`` are the self coefficients, ``a12`` the (symmetric) cross
    coefficient.  Dissipative rates and coherent shifts derive from them:
    Gamma_ij = 2 Re a_ij and U_ij = 2 Im a_ij, both integer multiples of
    g^2/xi; the coherent exchange rate is j_eff = U_12 / 2.
    """

    a11: ExactCoefficient
    a22: ExactCoefficient
    a12: ExactCoefficient
    g: float
    xi: float

    @property
    def a21(self) -> ExactCoefficient:
        return self.a12

    @property
    def rate_unit(self) -> float:
        """One integer unit of Gamma/U, i.e. g^2/xi."""
        return self.g * self.g / self.xi

    # integer units of g^2/xi, exact
    @property
    def gamma_units(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.a11.re_units, self.a12.re_units),
                (self.a12.re_units, self.a22.re_units))

    @property
    def u_units(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.a11.im_units, self.a12.im_units),
                (self.a12.im_units, self.a22.im_units))

    # materialized values
    @property
    def gamma(self) -> tuple[tuple[float, float], tuple[float, float]]:
        u = self.rate_unit
        gu = self.gamma_units
        return tuple(tuple(x * u for x in row) for row in gu)  # type: ignore[return-value]

    @property
    def u(self) -> tuple[tuple[float, float], tuple[float, float]]:
        un = self.rate_unit
        uu = self.u_units
        return tuple(tuple(x * un for x in row) for row in uu)  # type: ignore[return-value]

    @property
    def j_eff(self) -> float:
        """Coherent exchange rate U_12 / 2 = im_units(a12) * g^2/(2 xi)."""
        return self.a12.im_units * self.g * self.g / (2.0 * self.xi)


def coefficient_matrix(geom: AtomGeometry, waveguide: WaveguideConfig) -> RateTable:
    """Exact coefficient matrix for two resonant emitters with equal coupling.

    Raises if the geometry does not hold exactly two atoms, if either atom
    is off-resonant with the band center, or if the couplings differ (the
    closed-form table assumes a common g).
    """
    if geom.n_atoms != 2:
        raise ValueError("coefficient_matrix needs exactly two atoms")
    require_resonant(geom, waveguide)
    a1, a2 = geom.atoms
    if abs(a1.g - a2.g) > _RESONANCE_RTOL * max(a1.g, a2.g):
        raise ValueError(f"atoms must share one coupling g, got {a1.g} and {a2.g}")
    return RateTable(
        a11=single_atom_coefficient(a1.span, a1.g, waveguide.xi),
        a22=single_atom_coefficient(a2.span, a2.g, waveguide.xi),
        a12=_pair_coefficient(a1.sites, a2.sites),
        g=a1.g,
        xi=waveguide.xi,
    )


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------

def dispersion(k: float, waveguide: WaveguideConfig) -> float:
    """Band dispersion omega(k) = omega_c - 2 xi cos(k).

    k is a wavenumber in the principal zone (-pi, pi]; values outside are
    folded back by periodicity of the cosine, so no range check is needed.
    """
    return waveguide.omega_c - 2.0 * waveguide.xi * cos(k)


# ---------------------------------------------------------------------------
# constrained geometry search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateCondition:
    """A single exact condition on one rate, in integer units of g^2/xi."""

    op: str       # "eq" or "ne"
    units: int

    def __post_init__(self):
        if self.op not in ("eq", "ne"):
            raise ValueError(f"op must be 'eq' or 'ne', got {self.op!r}")

    def matches(self, units: int) -> bool:
        return (units == self.units) if self.op == "eq" else (units != self.units)


def eq(units: int) -> RateCondition:
    return RateCondition("eq", units)


def ne(units: int) -> RateCondition:
    return RateCondition("ne", units)


_CONSTRAINT_KEYS = ("g11", "g22", "g12", "u11", "u22", "u12")


@dataclass(frozen=True)
class RateConstraint:
    """Conjunction of exact integer conditions on the six two-atom rates.

    Field names follow the rate-table CSV schema: g11/g22/g12 are the
    dissipative rates Gamma_ij and u11/u22/u12 the coherent rates U_ij,
    all in integer units of g^2/xi.  ``None`` leaves a rate unconstrained.
    """

    g11: Optional[RateCondition] = None
    g22: Optional[RateCondition] = None
    g12: Optional[RateCondition] = None
    u11: Optional[RateCondition] = None
    u22: Optional[RateCondition] = None
    u12: Optional[RateCondition] = None

    @classmethod
    def dissipation_free_coupling(cls) -> "RateConstraint":
        """All decay channels and level shifts off, exchange coupling on."""
        return cls(g11=eq(0), g22=eq(0), g12=eq(0),
                   u11=eq(0), u22=eq(0), u12=ne(0))

    @classmethod
    def all_rates_zero(cls) -> "RateConstraint":
        """Fully decoupled pair: every waveguide-induced rate vanishes."""
        return cls(g11=eq(0), g22=eq(0), g12=eq(0),
                   u11=eq(0), u22=eq(0), u12=eq(0))

    @classmethod
    def parse(cls, text: str) -> "RateConstraint":
        """Parse 'g11=0,u12!=0' style constraint strings or preset names."""
        name = text.strip().lower()
        if name == "dissipation-free-coupling":
            return cls.dissipation_free_coupling()
        if name == "all-zero":
            return cls.all_rates_zero()
        fields: dict[str, RateCondition] = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "!=" in part:
                key, _, val = part.partition("!=")
                cond_op = "ne"
            elif "=" in part:
                key, _, val = part.partition("=")
                cond_op = "eq"
            else:
                raise ValueError(f"constraint term {part!r} needs '=' or '!='")
            key = key.strip().lower()
            if key not in _CONSTRAINT_KEYS:
                raise ValueError(
                    f"unknown rate {key!r}; expected one of {_CONSTRAINT_KEYS}")
            if key in fields:
                raise ValueError(f"rate {key!r} constrained twice")
            try:
                units = int(val.strip())
            except ValueError:
                raise ValueError(f"constraint value {val.strip()!r} is not an integer")
            fields[key] = RateCondition(cond_op, units)
        if not fields:
            raise ValueError(f"empty constraint {text!r}")
        return cls(**fields)

    def matches(self, table: RateTable) -> bool:
        gu = table.gamma_units
        uu = table.u_units
        values = {
            "g11": gu[0][0], "g22": gu[1][1], "g12": gu[0][1],
            "u11": uu[0][0], "u22": uu[1][1], "u12": uu[0][1],
        }
        for key in _CONSTRAINT_KEYS:
            cond: Optional[RateCondition] = getattr(self, key)
            if cond is not None and not cond.matches(values[key]):
                return False
        return True


@dataclass(frozen=True)
class SearchHit:
    """One canonical geometry matching a search constraint."""

    sites_a: tuple[int, int]
    sites_b: tuple[int, int]
    topology: Topology
    table: RateTable


def search_geometries(constraint: RateConstraint, max_span: int) -> list[SearchHit]:
    """Exhaustively enumerate canonical two-emitter layouts matching a constraint.

    Canonical form: four distinct connection sites, translated so the
    smallest is 0, each atom's sites ascending, atoms ordered by first
    site.  Every layout with overall span <= max_span appears exactly once;
    results are sorted lexicographically by (n1, n2, m1, m2).  All filtering
    happens in integer units, so the search is exact.
    """
    if max_span < 3:
        raise ValueError(f"max_span must be >= 3 to fit four distinct sites, got {max_span}")
    hits: list[SearchHit] = []
    # Site sets {0, b, c, d}: fixing the minimum at 0 enumerates each
    # translation class once; the three pairings cover the atom layouts.
    for b, c, d in itertools.combinations(range(1, max_span + 1), 3):
        sites = (0, b, c, d)
        for idx_a, idx_b in (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))):
            sa = (sites[idx_a[0]], sites[idx_a[1]])
            sb = (sites[idx_b[0]], sites[idx_b[1]])
            table = RateTable(
                a11=single_atom_coefficient(sa[1] - sa[0], 1.0, 1.0),
                a22=single_atom_coefficient(sb[1] - sb[0], 1.0, 1.0),
                a12=_pair_coefficient(sa, sb),
                g=1.0,
                xi=1.0,
            )
            if not constraint.matches(table):
                continue
            geom = AtomGeometry.pair(0.0, 1.0, sa, sb)
            hits.append(SearchHit(sa, sb, classify_topology(geom), table))
    hits.sort(key=lambda h: (h.sites_a, h.sites_b))
    return hits
