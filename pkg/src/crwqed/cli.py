"""Command-line front end: config parsing, experiment runs, CSV emission.

Usage:
    crwqed EXPERIMENT [key=value ...] [--config PATH] [--out DIR]
                      [--dt X] [--tmax X] [--threads N]

Experiments: rates, decay, entangle, nonreciprocal, search, and the figure
presets fig2a, fig2b, fig2c, fig3, fig4. Resolution order for every key is
preset default, then config file, then command-line overrides. Presets pin
their physics; only numerical and output keys may be overridden there.

All CSVs are deterministic: fixed column order, shortest round-trip float
formatting, `#`-metadata header lines, no timestamps. Each run also writes
`<experiment>_summary.json` recording its built-in consistency checks.

Exit codes: 0 all checks passed; 1 configuration error; 2 numerical failure.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import lattice, lindblad, model

__all__ = ["ConfigError", "RunConfig", "parse_config", "execute", "main"]


class ConfigError(ValueError):
    """Invalid configuration input; reported with key and line context."""


# ---------------------------------------------------------------------------
# key table and experiment definitions
# ---------------------------------------------------------------------------

def _positive(x):
    return x > 0


def _nonnegative(x):
    return x >= 0


# key -> (python type, validator or None, description)
_KEYS = {
    "experiment": (str, None, "experiment name"),
    "g": (float, _nonnegative, "atom-chain coupling, units of xi"),
    "xi": (float, _positive, "hop rate (sets the unit system)"),
    "omega_c": (float, None, "band center"),
    "kappa": (float, _nonnegative, "resonator loss"),
    "n_sites": (int, lambda v: v >= 3, "chain length"),
    "gamma1": (float, _nonnegative, "intrinsic decay"),
    "gamma2": (float, _nonnegative, "pure dephasing"),
    "span": (int, _positive, "single-atom connection separation"),
    "spans": (str, None, "comma-separated list of spans"),
    "sites_a": (str, None, "first atom sites, e.g. 0,2"),
    "sites_b": (str, None, "second atom sites, e.g. 1,3"),
    "include_intrinsic": (int, lambda v: v in (0, 1), "gamma1 inside the lattice run"),
    "tmax": (float, _positive, "time window end, units of 1/xi"),
    "t_points": (int, lambda v: v >= 2, "grid points including t=0"),
    "dt": (float, _positive, "integrator step"),
    "gamma11_j": (float, _nonnegative, "atom-1 waveguide decay, units of j_eff"),
    "gamma22_j": (float, _nonnegative, "atom-2 waveguide decay, units of j_eff"),
    "gamma1_j": (float, _nonnegative, "intrinsic decay, units of j_eff"),
    "gamma2_j": (float, _nonnegative, "dephasing, units of j_eff"),
    "gamma1_max_j": (float, _nonnegative, "fidelity-map gamma1 range end"),
    "gamma2_max_j": (float, _nonnegative, "fidelity-map gamma2 range end"),
    "grid_points": (int, lambda v: v >= 2, "fidelity-map points per axis"),
    "constraint": (str, None, "rate constraint, e.g. dissipation-free-coupling"),
    "max_span": (int, lambda v: v >= 3, "search span bound"),
    "out": (str, None, "output directory"),
    "threads": (int, _positive, "parallel workers for sweeps"),
}

_COMMON = {"experiment", "out", "threads", "dt", "tmax", "t_points", "xi", "omega_c"}

_BASE_WAVEGUIDE = {"g": 0.05, "xi": 1.0, "omega_c": 0.0, "kappa": 6e-3, "n_sites": 4000}

# experiment -> (defaults, locked-when-preset, extra allowed keys)
_EXPERIMENTS: dict[str, tuple[dict, frozenset, frozenset]] = {}


def _define(name, defaults, locked=(), allowed=()):
    _EXPERIMENTS[name] = (defaults, frozenset(locked), _COMMON | set(defaults) | set(allowed))


_DECAY_DEFAULTS = dict(
    _BASE_WAVEGUIDE, span=4, gamma1=0.0, include_intrinsic=0,
    tmax=150.0, t_points=301, dt=0.005,
)
_define("decay", _DECAY_DEFAULTS, allowed={"spans"})
_define(
    "fig2a",
    dict(_BASE_WAVEGUIDE, spans="3,4", gamma1=0.0, include_intrinsic=0,
         tmax=150.0, t_points=301, dt=0.005),
    locked={"g", "xi", "omega_c", "kappa", "n_sites", "spans", "gamma1", "include_intrinsic"},
)
_define(
    "fig2b",
    dict(_BASE_WAVEGUIDE, spans="2,6,10", gamma1=3e-4, include_intrinsic=0,
         tmax=4000.0, t_points=801, dt=0.01),
    locked={"g", "xi", "omega_c", "kappa", "n_sites", "spans", "gamma1", "include_intrinsic"},
)
_define(
    "fig2c",
    dict(_BASE_WAVEGUIDE, g=0.15, spans="2,6,10", gamma1=3e-4, include_intrinsic=0,
         tmax=4000.0, t_points=801, dt=0.01),
    locked={"g", "xi", "omega_c", "kappa", "n_sites", "spans", "gamma1", "include_intrinsic"},
)
_define("rates", {"g": 0.05, "xi": 1.0, "omega_c": 0.0, "sites_a": "0,2", "sites_b": "1,3"})
_define("search", {"constraint": "dissipation-free-coupling", "max_span": 12})
_define("entangle", {"g": 0.05, "xi": 1.0, "gamma1_j": 0.1, "gamma2_j": 0.2})
_NONRECIP_DEFAULTS = {
    "g": 0.05, "xi": 1.0, "gamma11_j": 0.0, "gamma22_j": 2.0,
    "tmax": 4000.0, "t_points": 801,
}
_define("nonreciprocal", _NONRECIP_DEFAULTS, allowed={"dt"})
_define(
    "fig3",
    {"g": 0.05, "xi": 1.0, "gamma1_max_j": 0.1, "gamma2_max_j": 0.2, "grid_points": 11},
    locked={"g", "xi", "gamma1_max_j", "gamma2_max_j", "grid_points"},
)
_define(
    "fig4",
    dict(_NONRECIP_DEFAULTS),
    locked={"g", "xi", "gamma11_j", "gamma22_j"},
    allowed={"dt"},
)

_PRESETS = frozenset({"fig2a", "fig2b", "fig2c", "fig3", "fig4"})


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved experiment configuration."""

    experiment: str
    values: dict
    sources: dict = field(default_factory=dict)   # key -> preset|file:<line>|flag

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _convert(key: str, raw: str, where: str):
    if key not in _KEYS:
        raise ConfigError(f"unknown key {key!r} ({where})")
    typ, check, _ = _KEYS[key]
    try:
        value = typ(raw) if typ is not str else raw
    except ValueError:
        raise ConfigError(f"malformed {typ.__name__} for key {key!r}: {raw!r} ({where})") from None
    if check is not None and not check(value):
        raise ConfigError(f"value out of range for key {key!r}: {raw!r} ({where})")
    return value


def _parse_file_text(text: str):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key=value on line {lineno}: {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        pairs.append((key, raw, f"line {lineno}"))
    return pairs


def parse_config(
    text: str = "",
    experiment: str | None = None,
    overrides: list[str] | None = None,
    flags: dict | None = None,
) -> RunConfig:
    """Resolve a run configuration from preset, file text, and flags.

    `text` is the config-file body (may be empty), `experiment` the
    subcommand, `overrides` positional key=value strings, `flags` the
    dashed options; later sources win.
    """
    staged: list[tuple[str, object, str, bool]] = []   # key, value, source, converted
    for key, raw, where in _parse_file_text(text):
        staged.append((key, raw, f"file:{where}", False))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value argument, got {item!r}")
        key, raw = item.split("=", 1)
        staged.append((key.strip(), raw.strip(), "flag", False))
    for key, value in (flags or {}).items():
        if value is not None:
            staged.append((key, value, "flag", True))

    exp = experiment
    exp_source = "subcommand"
    for key, raw, source, converted in staged:
        if key == "experiment":
            name = raw if converted else _convert("experiment", str(raw), source)
            if exp is not None and name != exp:
                raise ConfigError(
                    f"experiment {name!r} ({source}) contradicts {exp!r} ({exp_source})"
                )
            exp, exp_source = name, source
    if exp is None:
        raise ConfigError("experiment required")
    if exp not in _EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {exp!r}; choose from {', '.join(sorted(_EXPERIMENTS))}"
        )

    defaults, locked, allowed = _EXPERIMENTS[exp]
    values = dict(defaults)
    values.setdefault("out", ".")
    values.setdefault("threads", 1)
    sources = {k: "preset" for k in values}
    for key, raw, source, converted in staged:
        if key == "experiment":
            continue
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r} ({source})")
        if key not in allowed:
            raise ConfigError(f"key {key!r} does not apply to experiment {exp!r} ({source})")
        if exp in _PRESETS and key in locked:
            raise ConfigError(
                f"key {key!r} is pinned by preset {exp!r} and cannot be overridden ({source})"
            )
        value = raw if converted else _convert(key, str(raw), source)
        if converted:
            typ, check, _ = _KEYS[key]
            value = typ(value)
            if check is not None and not check(value):
                raise ConfigError(f"value out of range for key {key!r}: {value!r} ({source})")
        values[key] = value
        sources[key] = source
    return RunConfig(experiment=exp, values=values, sources=sources)


def _parse_sites(text: str, key: str) -> tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"key {key!r} needs two comma-separated sites, got {text!r}")
    try:
        a, b = (int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"non-integer site in {key!r}: {text!r}") from None
    return a, b


def _parse_spans(text: str) -> tuple[int, ...]:
    try:
        spans = tuple(int(p.strip()) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"non-integer span in spans={text!r}") from None
    if not spans or any(s < 1 for s in spans):
        raise ConfigError(f"spans must be positive integers, got {text!r}")
    return spans


# ---------------------------------------------------------------------------
# deterministic CSV emission
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x) + 0.0)   # +0.0 maps -0.0 to 0.0


def _csv_text(meta: list[tuple[str, object]], header: list[str], rows) -> str:
    lines = [f"# {k}={_fmt(v) if isinstance(v, (int, float, np.integer, np.floating)) else v}"
             for k, v in meta]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


class _OutputSet:
    """Stages files and removes everything it wrote if the run fails."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.written: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        tmp = path + ".tmp"
        with open(tmp, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
        self.written.append(path)
        return path

    def discard_all(self):
        for path in self.written:
            try:
                os.remove(path)
            except OSError:
                pass
        self.written.clear()


def _meta_common(cfg: RunConfig, extra: list[tuple[str, object]]) -> list[tuple[str, object]]:
    meta = [("experiment", cfg.experiment)]
    meta.extend(extra)
    meta.append(("units", "time in 1/xi; rates in xi unless suffixed _j (units of j_eff)"))
    return meta


# ---------------------------------------------------------------------------
# experiment workers (module-level: must pickle for process pools)
# ---------------------------------------------------------------------------

def _decay_curves(args):
    """One single-atom lattice run plus its reduced-model curves."""
    (span, g, xi, omega_c, kappa, n_sites, gamma1, include_intrinsic,
     tmax, t_points, dt) = args
    w = model.WaveguideConfig(omega_c=omega_c, xi=xi, kappa=kappa, n_sites=n_sites)
    geom = lattice.center_geometry(
        model.AtomGeometry.single(omega_c, g, (0, span), gamma1=gamma1), n_sites
    )
    h = lattice.build_hamiltonian(w, geom, include_intrinsic=bool(include_intrinsic))
    t = np.linspace(0.0, tmax, t_points)
    p_lat = lattice.atom_population(lattice.propagate(h, lattice.excited_state(h), t, dt=dt), 0)
    a = model.single_atom_coefficient(span, g, xi).value(g, xi)
    p_markov = lindblad.markov_pe(a, t)
    p_intrinsic = np.exp(-gamma1 * t)
    return t, p_markov, p_lat, p_intrinsic


def _fidelity_point(args):
    """Bell fidelity at the quarter exchange time for one (gamma1, gamma2)."""
    j, g1_j, g2_j = args
    r = lindblad.TwoAtomRates(0.0, 0.0, u12=2.0 * j, gamma1=g1_j * j, gamma2=g2_j * j)
    rho0 = lindblad.pure_density(lindblad.basis_ket("eg"))
    (rho,) = lindblad.evolve_density(lindblad.build_liouvillian(r), rho0, [math.pi / (4.0 * j)])
    return lindblad.bell_fidelity(rho), lindblad.fidelity_linear_estimate(g1_j * j, g2_j * j, j)


def _map_jobs(jobs, worker, threads: int):
    if threads > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


# ---------------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------------

def _check(checks: list, name: str, passed: bool, detail: str):
    checks.append({"name": name, "passed": bool(passed), "detail": detail})


def _run_decay_family(cfg: RunConfig, out: _OutputSet, checks: list):
    spans = _parse_spans(cfg["spans"]) if "spans" in cfg.values else (cfg["span"],)
    jobs = [
        (span, cfg["g"], cfg["xi"], cfg["omega_c"], cfg["kappa"], cfg["n_sites"],
         cfg["gamma1"], cfg["include_intrinsic"], cfg["tmax"], cfg["t_points"], cfg["dt"])
        for span in spans
    ]
    results = _map_jobs(jobs, _decay_curves, cfg["threads"])

    long_window = cfg["tmax"] * 0.1   # skip the early transient for ordering checks
    for span, (t, p_markov, p_lat, p_intr) in zip(spans, results):
        meta = _meta_common(cfg, [
            ("span", span), ("g", cfg["g"]), ("xi", cfg["xi"]), ("kappa", cfg["kappa"]),
            ("n_sites", cfg["n_sites"]), ("gamma1", cfg["gamma1"]),
            ("include_intrinsic", cfg["include_intrinsic"]),
            ("dt", cfg["dt"]),
            ("note", "p_markov=exp(-2*Re(A)*t); p_intrinsic=exp(-gamma1*t); "
                     "lattice run excludes gamma1 unless include_intrinsic=1"),
        ])
        name = "decay.csv" if len(spans) == 1 else f"decay_N{span}.csv"
        rows = zip(t, p_markov, p_lat, p_intr)
        out.write(name, _csv_text(meta, ["t", "p_markov", "p_lattice", "p_intrinsic"], rows))

        if cfg["gamma1"] == 0.0:
            dev = float(np.max(np.abs(p_lat - p_markov)))
            _check(checks, f"markov_agreement_N{span}", dev <= 0.03,
                   f"max|p_lattice - p_markov| = {dev:.6g} (tol 0.03)")
        else:
            late = t >= long_window
            if cfg["g"] <= 0.05:
                ok = bool(np.all(p_lat[late] > p_intr[late]))
                _check(checks, f"protected_above_intrinsic_N{span}", ok,
                       f"lattice stays above exp(-gamma1 t) for t >= {long_window:g}")
            elif span == 2:
                below = p_lat < p_intr
                idx = np.flatnonzero(below)
                length = float(t[idx[-1]] - t[idx[0]]) if idx.size else 0.0
                _check(checks, f"crossing_below_intrinsic_N{span}", length >= 500.0,
                       f"below-interval length {length:g} (need >= 500)")


def _run_rates(cfg: RunConfig, out: _OutputSet, checks: list):
    sa = _parse_sites(cfg["sites_a"], "sites_a")
    sb = _parse_sites(cfg["sites_b"], "sites_b")
    w = model.WaveguideConfig(omega_c=cfg["omega_c"], xi=cfg["xi"])
    geom = model.AtomGeometry.pair(cfg["omega_c"], cfg["g"], sa, sb)
    table = model.coefficient_matrix(geom, w)
    topo = model.classify_topology(geom)
    gu, uu = table.gamma_units, table.u_units
    meta = _meta_common(cfg, [
        ("g", cfg["g"]), ("xi", cfg["xi"]),
        ("note", "rate columns in integer units of g^2/xi"),
    ])
    row = [sa[0], sa[1], sb[0], sb[1], topo.value,
           gu[0][0], gu[1][1], gu[0][1], uu[0][0], uu[1][1], uu[0][1]]
    out.write("rates.csv", _csv_text(
        meta,
        ["n1", "n2", "m1", "m2", "topology", "g11", "g22", "g12", "u11", "u22", "u12"],
        [row],
    ))
    psd = gu[0][0] >= 0 and gu[1][1] >= 0 and gu[0][0] * gu[1][1] - gu[0][1] ** 2 >= 0
    _check(checks, "dissipation_matrix_psd", psd, f"gamma units {gu}")


def _run_search(cfg: RunConfig, out: _OutputSet, checks: list):
    try:
        constraint = model.RateConstraint.parse(cfg["constraint"])
    except ValueError as exc:
        raise ConfigError(f"constraint: {exc}") from None
    hits = model.search_geometries(constraint, cfg["max_span"])
    meta = _meta_common(cfg, [
        ("constraint", cfg["constraint"]), ("max_span", cfg["max_span"]),
        ("note", "rate columns in integer units of g^2/xi; canonical layouts only"),
    ])
    rows = []
    for h in hits:
        gu, uu = h.table.gamma_units, h.table.u_units
        rows.append([h.sites_a[0], h.sites_a[1], h.sites_b[0], h.sites_b[1],
                     h.topology.value, gu[0][0], gu[1][1], gu[0][1],
                     uu[0][0], uu[1][1], uu[0][1]])
    out.write("search.csv", _csv_text(
        meta,
        ["n1", "n2", "m1", "m2", "topology", "g11", "g22", "g12", "u11", "u22", "u12"],
        rows,
    ))
    verified = all(constraint.matches(h.table) for h in hits)
    _check(checks, "hits_satisfy_constraint", verified, f"{len(hits)} hits re-verified")
    keys = [(h.sites_a, h.sites_b) for h in hits]
    _check(checks, "hits_sorted", keys == sorted(keys), "canonical ordering")


def _run_entangle(cfg: RunConfig, out: _OutputSet, checks: list):
    j = cfg["g"] ** 2 / cfg["xi"]   # braided (0,2),(1,3) exchange rate
    if cfg.experiment == "fig3":
        n = cfg["grid_points"]
        g1_grid = np.linspace(0.0, cfg["gamma1_max_j"], n)
        g2_grid = np.linspace(0.0, cfg["gamma2_max_j"], n)
        jobs = [(j, float(g1), float(g2)) for g1 in g1_grid for g2 in g2_grid]
    else:
        jobs = [(j, cfg["gamma1_j"], cfg["gamma2_j"])]
    results = _map_jobs(jobs, _fidelity_point, cfg["threads"])

    meta = _meta_common(cfg, [
        ("g", cfg["g"]), ("xi", cfg["xi"]), ("j_eff", j),
        ("note", "gamma columns in units of j_eff; evaluated at t = pi/(4 j_eff) "
                 "from one atom excited"),
    ])
    rows = [
        [job[1], job[2], f_me, f_lin]
        for job, (f_me, f_lin) in zip(jobs, results)
    ]
    out.write("fidelity.csv", _csv_text(
        meta, ["gamma1", "gamma2", "F_me", "F_linear"], rows,
    ))

    (f_ref, _) = _fidelity_point((j, 0.0, 0.0))
    _check(checks, "pure_exchange_unit_fidelity", abs(f_ref - 1.0) <= 1e-8,
           f"|F(0,0) - 1| = {abs(f_ref - 1.0):.3e} (tol 1e-8)")
    if cfg.experiment == "fig3":
        f_corner = results[-1][0]
        _check(checks, "reference_point_fidelity", f_corner >= 0.92,
               f"F at (0.1, 0.2) j_eff = {f_corner:.6f} (need >= 0.92)")
        f_matrix = np.array([f for f, _ in results]).reshape(n, n)
        mono = bool(
            np.all(np.diff(f_matrix, axis=0) <= 1e-12)
            and np.all(np.diff(f_matrix, axis=1) <= 1e-12)
        )
        _check(checks, "fidelity_monotone_in_rates", mono, "non-increasing along both axes")
    else:
        f_me = results[0][0]
        _check(checks, "fidelity_in_unit_interval", 0.0 <= f_me <= 1.0, f"F_me = {f_me:.6f}")


def _run_nonreciprocal(cfg: RunConfig, out: _OutputSet, checks: list):
    j = cfg["g"] ** 2 / cfg["xi"]
    r = lindblad.TwoAtomRates(cfg["gamma11_j"] * j, cfg["gamma22_j"] * j, u12=2.0 * j)
    t = np.linspace(0.0, cfg["tmax"], cfg["t_points"])
    p1_c = lindblad.p1_closed(t, r)
    p2_c = lindblad.p2_closed(t, r)
    tr_c = lindblad.transmission_closed(t, r)

    L = lindblad.build_liouvillian(r)
    dt = cfg.get("dt")
    rho_eg = lindblad.pure_density(lindblad.basis_ket("eg"))
    rho_ge = lindblad.pure_density(lindblad.basis_ket("ge"))
    fwd = lindblad.evolve_density(L, rho_eg, t[1:], dt=dt)
    bwd = lindblad.evolve_density(L, rho_ge, t[1:], dt=dt)
    p1_me = np.concatenate(([1.0], lindblad.excited_population(fwd, 0)))
    t_fwd = np.concatenate(([0.0], lindblad.excited_population(fwd, 1)))
    p2_me = np.concatenate(([1.0], lindblad.excited_population(bwd, 1)))
    t_bwd = np.concatenate(([0.0], lindblad.excited_population(bwd, 0)))

    meta = _meta_common(cfg, [
        ("g", cfg["g"]), ("xi", cfg["xi"]), ("j_eff", j),
        ("gamma11_j", cfg["gamma11_j"]), ("gamma22_j", cfg["gamma22_j"]),
        ("note", "closed forms use denominator 2K and exponents sqrt(K)*t/2; the "
                 "printed 2K^2 and K*t/2 variants are misprints and fail the "
                 "integrator cross-check"),
    ])
    rows = zip(t, p1_c, p2_c, tr_c, p1_me, p2_me, t_fwd, t_bwd)
    out.write("nonreciprocal.csv", _csv_text(
        meta,
        ["t", "p1_closed", "p2_closed", "T_closed",
         "p1_me", "p2_me", "T_me_forward", "T_me_backward"],
        rows,
    ))

    dev = max(
        float(np.max(np.abs(p1_c - p1_me))),
        float(np.max(np.abs(p2_c - p2_me))),
        float(np.max(np.abs(tr_c - t_fwd))),
    )
    _check(checks, "closed_form_matches_integrator", dev <= 1e-6,
           f"max closed-form deviation {dev:.3e} (tol 1e-6)")
    recip = float(np.max(np.abs(t_fwd - t_bwd)))
    _check(checks, "transmission_reciprocity", recip <= 1e-8,
           f"max|T_forward - T_backward| = {recip:.3e} (tol 1e-8)")
    gap = float(np.max(np.abs(p1_me - p2_me)))
    if cfg["gamma11_j"] != cfg["gamma22_j"]:
        _check(checks, "population_nonreciprocity", gap > 0.1,
               f"max|P1 - P2| = {gap:.4f} (need > 0.1)")
    else:
        _check(checks, "population_symmetry", gap <= 1e-8,
               f"max|P1 - P2| = {gap:.3e} (tol 1e-8 for equal rates)")


_RUNNERS = {
    "decay": _run_decay_family,
    "fig2a": _run_decay_family,
    "fig2b": _run_decay_family,
    "fig2c": _run_decay_family,
    "rates": _run_rates,
    "search": _run_search,
    "entangle": _run_entangle,
    "fig3": _run_entangle,
    "nonreciprocal": _run_nonreciprocal,
    "fig4": _run_nonreciprocal,
}


def execute(cfg: RunConfig) -> tuple[list[str], dict]:
    """Run one experiment; returns (output paths, summary dict).

    Removes everything it wrote if the run fails part-way.
    """
    out = _OutputSet(cfg["out"])
    checks: list[dict] = []
    try:
        _RUNNERS[cfg.experiment](cfg, out, checks)
        summary = {
            "experiment": cfg.experiment,
            # out/threads are plumbing: keeping them out makes summaries
            # byte-identical across directories and worker counts
            "parameters": {k: cfg.values[k] for k in sorted(cfg.values)
                           if k not in ("out", "threads")},
            "checks": checks,
            "all_passed": all(c["passed"] for c in checks),
            "outputs": [os.path.basename(p) for p in out.written],
        }
        out.write(f"{cfg.experiment}_summary.json",
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except Exception:
        out.discard_all()
        raise
    return out.written, summary


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_argparser():
    import argparse

    parser = argparse.ArgumentParser(
        prog="crwqed",
        description="Two-site emitters on a resonator chain: rate tables, "
                    "reduced dynamics, and lattice cross-checks.",
    )
    parser.add_argument("experiment", nargs="?", default=None,
                        help="one of: " + ", ".join(sorted(_EXPERIMENTS)))
    parser.add_argument("overrides", nargs="*", default=[], metavar="key=value",
                        help="config overrides")
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--dt", type=float, default=None, help="integrator step")
    parser.add_argument("--tmax", type=float, default=None, help="time window end")
    parser.add_argument("--threads", type=int, default=None, help="sweep workers")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_argparser().parse_args(argv)
    try:
        text = ""
        if args.config is not None:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from None
        experiment = args.experiment
        overrides = list(args.overrides)
        if experiment is not None and "=" in experiment:
            overrides.insert(0, experiment)   # bare key=value without subcommand
            experiment = None
        if experiment is not None and experiment not in _EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {experiment!r}; choose from "
                f"{', '.join(sorted(_EXPERIMENTS))}"
            )
        cfg = parse_config(
            text,
            experiment=experiment,
            overrides=overrides,
            flags={"out": args.out, "dt": args.dt, "tmax": args.tmax,
                   "threads": args.threads},
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        paths, summary = execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (lattice.IntegrationError, lindblad.EvolutionError, ValueError) as exc:
        print(f"numerical failure in {cfg.experiment}: {exc}", file=sys.stderr)
        return 2

    for check in summary["checks"]:
        state = "PASS" if check["passed"] else "FAIL"
        print(f"check {check['name']}: {state} ({check['detail']})")
    for path in paths:
        print(f"wrote {path}")
    return 0 if summary["all_passed"] else 2
