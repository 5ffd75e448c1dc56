"""Acceptance suite: one test per advertised capability.

Each test records a labeled verdict on the conftest result board, so a
full run prints one pass/fail line per criterion. Tolerances are pinned
inline next to the assertions. Heavy lattice propagations are shared
through module-scoped fixtures; the whole suite runs in a few minutes.
"""

import math
import os
import time
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import record_criterion
from crwqed import cli, lattice, lindblad, model
from crwqed.model import eq, ne


def _criterion(name: str, passed: bool, detail: str):
    record_criterion(name, passed, detail)
    assert passed, f"{name}: {detail}"


def _load_csv(path) -> dict[str, np.ndarray]:
    """Columns of a metadata-prefixed CSV as float arrays keyed by header."""
    header, rows = None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append([float(x) for x in line.split(",")])
    data = np.array(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


def _contiguous_true_spans(t: np.ndarray, mask: np.ndarray):
    """Lengths (in time units) of maximal contiguous True runs."""
    spans, start = [], None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            spans.append(float(t[i - 1] - t[start]))
            start = None
    if start is not None:
        spans.append(float(t[-1] - t[start]))
    return spans


# ---------------------------------------------------------------------------
# shared heavy runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig2a_curves():
    """Single-emitter lattice decay for spans 3 and 4, with wall times."""
    out = {}
    w = model.WaveguideConfig(omega_c=0.0, xi=1.0, kappa=6e-3, n_sites=4000)
    t = np.linspace(0.0, 150.0, 301)
    for span in (3, 4):
        geom = lattice.center_geometry(
            model.AtomGeometry.single(0.0, 0.05, (0, span)), w.n_sites
        )
        h = lattice.build_hamiltonian(w, geom)
        tic = time.perf_counter()
        states = lattice.propagate(h, lattice.excited_state(h), t, dt=0.005)
        wall = time.perf_counter() - tic
        a = model.single_atom_coefficient(span, 0.05, 1.0).value(0.05, 1.0)
        out[span] = SimpleNamespace(
            t=t, p_lattice=lattice.atom_population(states, 0),
            p_markov=lindblad.markov_pe(a, t), wall=wall,
        )
    return out


@pytest.fixture(scope="module")
def fig2b_outputs(tmp_path_factory):
    """Weak-coupling protected-decay preset, run through the CLI."""
    out = tmp_path_factory.mktemp("fig2b")
    threads = min(3, os.cpu_count() or 1)
    cfg = cli.parse_config("", experiment="fig2b",
                           flags={"out": str(out), "threads": threads})
    _, summary = cli.execute(cfg)
    curves = {span: _load_csv(out / f"decay_N{span}.csv") for span in (2, 6, 10)}
    return curves, summary


@pytest.fixture(scope="module")
def fig2c_span2():
    """Strong-coupling span-2 lattice curve against the bare-loss exponential."""
    w = model.WaveguideConfig(omega_c=0.0, xi=1.0, kappa=6e-3, n_sites=4000)
    geom = lattice.center_geometry(model.AtomGeometry.single(0.0, 0.15, (0, 2)), w.n_sites)
    h = lattice.build_hamiltonian(w, geom)
    t = np.linspace(0.0, 4000.0, 801)
    states = lattice.propagate(h, lattice.excited_state(h), t, dt=0.01)
    return t, lattice.atom_population(states, 0)


@pytest.fixture(scope="module")
def exchange_run():
    """Lossless braided pair: full lattice excitation swap dynamics."""
    g = 0.1
    w = model.WaveguideConfig(omega_c=0.0, xi=1.0, kappa=0.0, n_sites=800)
    geom = lattice.center_geometry(model.AtomGeometry.pair(0.0, g, (0, 2), (1, 3)), w.n_sites)
    h = lattice.build_hamiltonian(w, geom)
    t = np.linspace(0.0, 350.0, 701)
    states = lattice.propagate(h, lattice.excited_state(h, 0), t, dt=0.005)
    return SimpleNamespace(
        t=t,
        p1=lattice.atom_population(states, 0),
        p2=lattice.atom_population(states, 1),
        norm=lattice.total_norm(states),
        j_eff=g * g,   # braided (0,2),(1,3): u12 = 2 g^2/xi, so j = g^2/xi
    )


@pytest.fixture(scope="module")
def directional_me():
    """Master-equation run at maximally asymmetric decay, both launch sides."""
    j = 0.0025
    rates = lindblad.TwoAtomRates(0.0, 2.0 * j, u12=2.0 * j)
    t = np.linspace(0.0, 4000.0, 81)
    L = lindblad.build_liouvillian(rates)
    rho_f = lindblad.evolve_density(L, lindblad.pure_density(lindblad.basis_ket("eg")), t)
    rho_b = lindblad.evolve_density(L, lindblad.pure_density(lindblad.basis_ket("ge")), t)
    return SimpleNamespace(j=j, rates=rates, t=t, rho_f=rho_f, rho_b=rho_b)


@pytest.fixture(scope="module")
def bell_run():
    """Exchange-generated Bell state at the reference loss rates."""
    j = 0.0025
    rates = lindblad.TwoAtomRates(0.0, 0.0, u12=2.0 * j, gamma1=0.1 * j, gamma2=0.2 * j)
    t = np.linspace(0.0, math.pi / (4.0 * j), 41)
    rhos = lindblad.evolve_density(
        lindblad.build_liouvillian(rates),
        lindblad.pure_density(lindblad.basis_ket("eg")), t,
    )
    return SimpleNamespace(j=j, rates=rates, t=t, rhos=rhos)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_exact_rate_table():
    """Induced rates from closed-path sums match the hand-derived table."""
    # single emitter, by span mod 4, in units of g^2/(2 xi)
    singles = {n: model.single_atom_coefficient(n, 1.0, 1.0) for n in (1, 2, 3, 4, 6, 8, 10)}
    ok = (
        singles[2].re_units == singles[2].im_units == 0
        and singles[6].re_units == singles[6].im_units == 0
        and singles[10].re_units == singles[10].im_units == 0
        and (singles[4].re_units, singles[4].im_units) == (4, 0)
        and (singles[8].re_units, singles[8].im_units) == (4, 0)
        and (singles[1].re_units, singles[1].im_units) == (2, 2)
        and (singles[3].re_units, singles[3].im_units) == (2, -2)
        and model.classify_single(2) is model.SingleAtomClass.DECOHERENCE_FREE
        and model.classify_single(4) is model.SingleAtomClass.SMALL_ATOM_LIKE
        and model.classify_single(3) is model.SingleAtomClass.LAMB_SHIFTED
    )
    # interleaved pair (0,2),(1,3): no dissipation, pure exchange u12 = 2 g^2/xi
    w = model.WaveguideConfig(omega_c=0.0, xi=1.0)
    table = model.coefficient_matrix(
        model.AtomGeometry.pair(0.0, 0.05, (0, 2), (1, 3)), w
    )
    ok = ok and table.gamma_units == ((0, 0), (0, 0))
    ok = ok and table.u_units == ((0, 2), (2, 0))
    ok = ok and table.j_eff == 0.05 * 0.05
    _criterion(
        "exact-rate-table", ok,
        "span classes and interleaved-pair units match hand derivation exactly",
    )


def test_single_atom_decay_matches_lattice(fig2a_curves):
    """Lattice decay tracks the induced-rate exponential at weak coupling."""
    devs, walls = {}, {}
    for span, run in fig2a_curves.items():
        devs[span] = float(np.max(np.abs(run.p_lattice - run.p_markov)))
        walls[span] = run.wall
    ok = all(d <= 0.03 for d in devs.values()) and all(wl < 120.0 for wl in walls.values())
    _criterion(
        "single-atom-decay-vs-lattice", ok,
        f"max|lattice - exponential| span3={devs[3]:.4f}, span4={devs[4]:.4f} "
        f"(tol 0.03); wall {max(walls.values()):.1f}s/curve (limit 120s)",
    )


def test_protected_and_crossing_decay(fig2b_outputs, fig2c_span2):
    """Span 2 mod 4 protects the excitation; strong coupling breaks through."""
    curves, summary = fig2b_outputs
    late_margin = {}
    for span, arr in curves.items():
        late = arr["t"] >= 400.0
        late_margin[span] = float(np.min(arr["p_lattice"][late] - arr["p_intrinsic"][late]))
    above_ok = all(m > 0.0 for m in late_margin.values()) and summary["all_passed"]

    # same protected runs, read at t = 2000: larger emitters leak faster
    p2000 = {span: float(arr["p_lattice"][arr["t"] == 2000.0][0])
             for span, arr in curves.items()}
    frozen = {2: 0.9374, 6: 0.8255, 10: 0.7290}
    order_ok = p2000[2] > p2000[6] > p2000[10]
    regress_ok = all(abs(p2000[s] - frozen[s]) < 0.05 for s in frozen)

    t, p_strong = fig2c_span2
    below = _contiguous_true_spans(t, p_strong < np.exp(-3e-4 * t))
    longest = max(below, default=0.0)
    below_ok = longest >= 500.0

    _criterion(
        "protected-and-crossing-decay",
        above_ok and order_ok and regress_ok and below_ok,
        f"weak-coupling curves above exp(-gamma1 t) for t>=400 (min margins "
        f"{ {s: round(m, 4) for s, m in late_margin.items()} }), ordering at t=2000 "
        f"{p2000[2]:.4f}>{p2000[6]:.4f}>{p2000[10]:.4f}, strong-coupling span-2 "
        f"below-interval {longest:.0f} time units (need >=500)",
    )


def test_decoherence_free_search():
    """Zero-dissipation coupling exists only interleaved, at |u12| = 2 units."""
    df = model.search_geometries(model.RateConstraint.dissipation_free_coupling(), 12)
    braided_only = all(h.topology is model.Topology.BRAIDED for h in df)
    bound_ok = all(abs(h.table.u_units[0][1]) == 2 for h in df)
    has_minimal = any((h.sites_a, h.sites_b) == ((0, 2), (1, 3)) for h in df)

    # wider context: without the zero-dissipation requirement the
    # cross-coupling reaches 4 units, and only on dissipating layouts
    everything = model.search_geometries(model.RateConstraint(), 12)
    global_max = max(abs(h.table.u_units[0][1]) for h in everything)
    saturating = [h for h in everything if abs(h.table.u_units[0][1]) == global_max]
    saturators_dissipate = all(
        h.table.gamma_units[0][0] > 0 or h.table.gamma_units[1][1] > 0
        for h in saturating
    )
    ok = (braided_only and bound_ok and has_minimal and len(df) > 0
          and global_max == 4 and saturators_dissipate)
    _criterion(
        "decoherence-free-search", ok,
        f"{len(df)} dissipation-free hits, all interleaved with |u12| = 2 units; "
        f"unconstrained maximum is {global_max} units and occurs only with "
        f"on-site dissipation",
    )


def test_exchange_rate_oracle(exchange_run):
    """Full-lattice swap period matches pi / j_eff from the rate table."""
    r = exchange_run
    window = r.t <= 300.0   # keep clear of any boundary echo
    t_half = float(r.t[window][np.argmax(r.p2[window])])
    period = 2.0 * t_half
    target = math.pi / r.j_eff
    rel = abs(period - target) / target
    swap_depth = float(np.max(r.p2[window]))
    ok = rel <= 0.05 and swap_depth > 0.9
    _criterion(
        "exchange-rate-oracle", ok,
        f"lattice period {period:.2f} vs pi/j_eff {target:.2f} "
        f"(rel dev {rel:.4f}, tol 0.05); swap depth {swap_depth:.3f}",
    )


def test_closed_form_equivalence(directional_me):
    """Closed-form populations match the integrator on realizable rates."""
    # geometrically realizable (gamma11, gamma22) with pure exchange:
    # enumeration puts them at {0, 4} x {0, 4} in units of g^2/xi
    hits = model.search_geometries(
        model.RateConstraint(g12=eq(0), u11=eq(0), u22=eq(0), u12=ne(0)), 8
    )
    combos = {}
    for h in hits:
        key = (h.table.gamma_units[0][0], h.table.gamma_units[1][1])
        combos.setdefault(key, h)
    grid_ok = sorted(combos) == [(0, 0), (0, 4), (4, 0), (4, 4)]

    g, w = 0.05, model.WaveguideConfig(omega_c=0.0, xi=1.0)
    worst = 0.0
    t = np.linspace(0.0, 4000.0, 81)
    for h in combos.values():
        table = model.coefficient_matrix(
            model.AtomGeometry.pair(0.0, g, h.sites_a, h.sites_b), w
        )
        r = lindblad.TwoAtomRates.from_rate_table(table)
        L = lindblad.build_liouvillian(r)
        fwd = lindblad.evolve_density(L, lindblad.pure_density(lindblad.basis_ket("eg")), t)
        dev = max(
            float(np.max(np.abs(lindblad.p1_closed(t, r) - lindblad.excited_population(fwd, 0)))),
            float(np.max(np.abs(lindblad.transmission_closed(t, r) - lindblad.excited_population(fwd, 1)))),
        )
        worst = max(worst, dev)

    # the same check rejects the two plausible-looking broken variants:
    # a squared denominator and a missing square root in the exponent
    d = directional_me
    delta = d.rates.gamma11 + d.rates.gamma22
    big_delta = d.rates.gamma11 - d.rates.gamma22
    k = big_delta * big_delta - 16.0 * d.j * d.j
    tt = d.t.astype(complex)
    env = np.exp(-delta * tt / 2.0)
    root = np.sqrt(complex(k))
    m_plus = np.exp(-root * tt / 2.0) + np.exp(root * tt / 2.0)
    m_minus = np.exp(-root * tt / 2.0) - np.exp(root * tt / 2.0)
    p1_me = lindblad.excited_population(d.rho_f, 0)
    t_me = lindblad.excited_population(d.rho_f, 1)
    p1_bad_denom = (env / (2.0 * k * k)) * (
        (big_delta ** 2 - 8.0 * d.j ** 2) * m_plus + root * big_delta * m_minus
        - 16.0 * d.j ** 2
    )
    t_bad_exp = (4.0 * d.j ** 2 / k) * env * (
        np.exp(k * tt / 2.0) + np.exp(-k * tt / 2.0) - 2.0
    )
    dev_denom = float(np.max(np.abs(p1_bad_denom.real - p1_me)))
    dev_exp = float(np.max(np.abs(t_bad_exp.real - t_me)))
    variants_fail = dev_denom > 1e-6 and dev_exp > 1e-6

    ok = grid_ok and worst <= 1e-6 and variants_fail
    _criterion(
        "closed-form-equivalence", ok,
        f"realizable grid {{0,4}}^2 units confirmed; max closed-vs-integrator "
        f"deviation {worst:.2e} (tol 1e-6); broken variants deviate by "
        f"{dev_denom:.3g} and {dev_exp:.3g}",
    )


def test_nonreciprocal_populations(directional_me):
    """Asymmetric decay separates the two launch directions, not the yield."""
    d = directional_me
    p1 = lindblad.excited_population(d.rho_f, 0)
    p2 = lindblad.excited_population(d.rho_b, 1)
    t_fwd = lindblad.excited_population(d.rho_f, 1)
    t_bwd = lindblad.excited_population(d.rho_b, 0)
    gap = float(np.max(np.abs(p1 - p2)))
    recip = float(np.max(np.abs(t_fwd - t_bwd)))
    ok = gap > 0.1 and recip <= 1e-8
    _criterion(
        "nonreciprocal-populations", ok,
        f"max|P1 - P2| = {gap:.4f} (need > 0.1); "
        f"max|T_fwd - T_bwd| = {recip:.2e} (tol 1e-8)",
    )


def test_bell_state_fidelity(bell_run):
    """Quarter-cycle exchange prepares the Bell state; losses enter linearly."""
    j = bell_run.j
    # lossless reference
    r0 = lindblad.TwoAtomRates(0.0, 0.0, u12=2.0 * j)
    (rho_ideal,) = lindblad.evolve_density(
        lindblad.build_liouvillian(r0),
        lindblad.pure_density(lindblad.basis_ket("eg")), [math.pi / (4.0 * j)],
    )
    f_ideal = lindblad.bell_fidelity(rho_ideal)
    ideal_ok = abs(f_ideal - 1.0) <= 1e-8

    f_ref = lindblad.bell_fidelity(bell_run.rhos[-1])
    ref_ok = f_ref >= 0.92

    errs = []
    for scale in (1.0, 0.5, 0.25):
        g1, g2 = scale * 0.1 * j, scale * 0.2 * j
        r = lindblad.TwoAtomRates(0.0, 0.0, u12=2.0 * j, gamma1=g1, gamma2=g2)
        (rho,) = lindblad.evolve_density(
            lindblad.build_liouvillian(r),
            lindblad.pure_density(lindblad.basis_ket("eg")), [math.pi / (4.0 * j)],
        )
        errs.append(abs(lindblad.bell_fidelity(rho)
                        - lindblad.fidelity_linear_estimate(g1, g2, j)))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    # at-least-linear convergence: halving the rates at least halves the gap
    linear_ok = all(rat >= 1.8 for rat in ratios)

    ok = ideal_ok and ref_ok and linear_ok
    _criterion(
        "bell-state-fidelity", ok,
        f"lossless fidelity 1 within {abs(f_ideal - 1.0):.1e} (tol 1e-8); "
        f"F = {f_ref:.5f} at reference rates (need >= 0.92); linear-estimate "
        f"gap shrinks x{ratios[0]:.2f}, x{ratios[1]:.2f} per halving (need >= 1.8)",
    )


def test_pt_phase_classification():
    """Phase labels and eigenfrequencies match a direct 2x2 eigensolve."""
    J = 0.0025
    sym = [(0.0, 0.0), (0.0, J), (0.0, 2 * J), (0.0, 3 * J),
           (J, J), (J, 2 * J), (2 * J, 3 * J), (3 * J, 3 * J)]
    # |gamma11 - gamma22| = 4 j exactly: power-of-two multiples keep the
    # discriminant at floating-point zero
    ep = [(0.0, 4 * J, J), (4 * J, 0.0, J), (0.0, 8 * J, 2 * J), (16 * J, 0.0, 4 * J)]
    broken = [(0.0, 5 * J), (0.0, 6 * J), (0.0, 8 * J), (0.0, 12 * J),
              (5 * J, 0.0), (J, 8 * J), (2 * J, 8 * J), (0.0, 100 * J)]
    grid = ([(g1, g2, J, lindblad.PTPhase.SYMMETRIC) for g1, g2 in sym]
            + [(g1, g2, j, lindblad.PTPhase.EXCEPTIONAL_POINT) for g1, g2, j in ep]
            + [(g1, g2, J, lindblad.PTPhase.BROKEN) for g1, g2 in broken])
    assert len(grid) == 20

    labels_ok = structure_ok = True
    eig_dev = 0.0
    for g1, g2, j, expected in grid:
        wp, wm, phase = lindblad.pt_eigenfrequencies(g1, g2, j)
        labels_ok = labels_ok and phase is expected
        if expected is lindblad.PTPhase.SYMMETRIC:
            structure_ok = structure_ok and wp.imag == wm.imag and wp.real > wm.real
        elif expected is lindblad.PTPhase.BROKEN:
            structure_ok = structure_ok and wp.real == 0.0 and wm.real == 0.0 and wp != wm
        else:
            structure_ok = structure_ok and wp == wm
        oracle = np.linalg.eigvals(np.array([[-0.5j * g1, j], [j, -0.5j * g2]]))
        dev = min(
            max(abs(wp - oracle[0]), abs(wm - oracle[1])),
            max(abs(wp - oracle[1]), abs(wm - oracle[0])),
        )
        # at coalescence the reference eigensolver is sqrt-conditioned, so
        # it cannot resolve the degenerate pair below ~1e-10; elsewhere the
        # analytic frequencies must match it to rounding
        tol = 1e-9 if expected is lindblad.PTPhase.EXCEPTIONAL_POINT else 1e-14
        eig_dev = max(eig_dev, float(dev) / tol)
        labels_ok = labels_ok and dev <= tol
    ok = labels_ok and structure_ok
    _criterion(
        "pt-phase-classification", ok,
        f"20-point grid: tags and spectral structure (equal imaginary parts / "
        f"zero real parts / exact coalescence) all correct; worst eigensolve "
        f"deviation at {eig_dev:.2f} of its class tolerance",
    )


def test_integrator_hygiene(directional_me, bell_run, exchange_run):
    """Density-matrix structure and lattice norm stay numerically clean."""
    trace_dev = herm_dev = 0.0
    min_eig = 1.0
    for rho in list(directional_me.rho_f) + list(directional_me.rho_b) + list(bell_run.rhos):
        trace_dev = max(trace_dev, abs(float(np.trace(rho).real) - 1.0),
                        abs(float(np.trace(rho).imag)))
        herm_dev = max(herm_dev, float(np.max(np.abs(rho - rho.conj().T))))
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(rho))))

    drift = float(np.max(np.abs(exchange_run.norm - 1.0)))
    drift_rate = drift / float(exchange_run.t[-1])

    ok = (trace_dev < 1e-9 and herm_dev < 1e-12 and min_eig >= -1e-9
          and drift_rate <= 1e-9)
    _criterion(
        "integrator-hygiene", ok,
        f"trace dev {trace_dev:.1e} (<1e-9), hermiticity {herm_dev:.1e} "
        f"(<1e-12), min eigenvalue {min_eig:.1e} (>=-1e-9), lossless-lattice "
        f"norm drift {drift_rate:.1e} per unit time (<=1e-9)",
    )
