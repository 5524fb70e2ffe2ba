"""Scenario configuration and the pipelines behind the command line.

A scenario is an INI file with one section per concern.  Every physical
quantity is in natural units and ``[scenario] units = natural`` is required.
Parsing checks types, ranges and unknown keys and names the offending
``section.key`` in every message.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import perturbative as pt
from .dirac import HamiltonianModel, assemble, check_resolution
from .errors import EmptyTruncation, ValidationError
from .fidelity import (
    FidelitySeries,
    fidelity_current,
    fidelity_ensemble,
    fidelity_ode,
    fidelity_overlap,
)
from .fields import ConstantScalar, GaussianMagnetic, GaussianScalar, PerturbationField, Profile, Zero
from .grid import TransverseGrid
from .kg import KGGrid, KGPropagatorMatrix, KGSeries, kg_echo_kernel, kg_fidelity, positive_frequency_state
from .landau import BasisTruncation, ParticleParams, QuantumNumbers, landau_energy

PROFILES = ("zero", "constant_scalar", "gaussian_scalar", "gaussian_magnetic")
SIM_METHODS = ("overlap", "current", "ode")

_SCHEMA = {
    "scenario": {"units", "methods", "seed", "name"},
    "particle": {"mass", "field", "kz", "density"},
    "perturbation": {"profile", "amplitude", "width", "center_x", "center_y", "strength", "target_loss", "frame"},
    "truncation": {"nu_max", "ml_min", "ml_max", "spins", "negative_energy", "max_dim"},
    "grid": {"extent", "points"},
    "initial": {"kind", "n", "ml", "s", "states", "weights"},
    "time": {"t_max", "samples"},
    "fit": {"window_low", "window_high", "boost_momenta", "convergence_tol", "boost_tol"},
    "kg": {
        "mass", "length", "points", "strength", "amplitude", "width", "center",
        "packet_center", "packet_width", "packet_momentum", "t_max", "samples",
    },
    "output": {"directory"},
}


class _Section:
    """Typed, field-named access to one config section."""

    def __init__(self, name: str, data: dict[str, str]):
        self.name = name
        self.data = data

    def _raw(self, key, default):
        if key in self.data:
            return self.data[key].strip()
        if default is _REQUIRED:
            raise ValidationError(f"{self.name}.{key}: required field is missing")
        return default

    def float(self, key, default=None, *, positive=False, nonneg=False):
        raw = self._raw(key, default)
        if raw is None or not isinstance(raw, str):
            return raw
        try:
            value = float(raw)
        except ValueError:
            raise ValidationError(f"{self.name}.{key}: expected a number, got {raw!r}") from None
        if not math.isfinite(value):
            raise ValidationError(f"{self.name}.{key}: must be finite")
        if positive and not value > 0:
            raise ValidationError(f"{self.name}.{key}: must be > 0, got {value}")
        if nonneg and value < 0:
            raise ValidationError(f"{self.name}.{key}: must be >= 0, got {value}")
        return value

    def int(self, key, default=None, *, minimum=None):
        raw = self._raw(key, default)
        if raw is None or not isinstance(raw, str):
            return raw
        try:
            value = int(raw)
        except ValueError:
            raise ValidationError(f"{self.name}.{key}: expected an integer, got {raw!r}") from None
        if minimum is not None and value < minimum:
            raise ValidationError(f"{self.name}.{key}: must be >= {minimum}, got {value}")
        return value

    def str(self, key, default=None, choices=None):
        raw = self._raw(key, default)
        if choices is not None and raw not in choices:
            raise ValidationError(f"{self.name}.{key}: must be one of {', '.join(choices)}, got {raw!r}")
        return raw

    def bool(self, key, default=False):
        raw = self._raw(key, None)
        if raw is None:
            return default
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"{self.name}.{key}: expected a boolean, got {raw!r}")

    def floats(self, key, default=()):
        raw = self._raw(key, None)
        if raw is None or raw == "":
            return tuple(default)
        try:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        except ValueError:
            raise ValidationError(f"{self.name}.{key}: expected a list of numbers, got {raw!r}") from None


_REQUIRED = object()


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    labels: tuple[tuple[int, int, int], ...] = ()
    weights: tuple[float, ...] = ()


@dataclass(frozen=True)
class KGConfig:
    mass: float
    grid: KGGrid
    strength: float
    amplitude: float
    width: float
    center: float
    packet_center: float
    packet_width: float
    packet_momentum: float
    times: np.ndarray = field(compare=False)

    def potential(self, x):
        return self.amplitude * np.exp(-0.5 * (x - self.center) ** 2 / self.width**2)

    def initial_state(self):
        x = self.grid.x
        phi = np.exp(-0.5 * (x - self.packet_center) ** 2 / self.packet_width**2 + 1j * self.packet_momentum * x)
        return positive_frequency_state(self.grid, self.mass, phi)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    methods: tuple[str, ...]
    seed: int
    particle: ParticleParams | None = None
    density: float | None = None
    profile: Profile | None = None
    profile_name: str = "zero"
    strength: float | str = 0.0
    target_loss: float = 3e-3
    frame: str = "lab"
    truncation: BasisTruncation | None = None
    grid: TransverseGrid | None = None
    initial: InitialSpec | None = None
    times: np.ndarray | None = None
    fit_window: tuple[float, float] = pt.FIT_WINDOW
    boost_momenta: tuple[float, ...] = ()
    boost_tol: float = 0.01
    convergence_tol: float = 0.01
    kg: KGConfig | None = None
    output: str | None = None

    def require(self, *names: str) -> None:
        section = {"particle": "particle", "profile": "perturbation", "truncation": "truncation",
                   "grid": "grid", "initial": "initial", "times": "time", "kg": "kg"}
        for n in names:
            if getattr(self, n) is None:
                raise ValidationError(f"[{section[n]}]: section is required for this command")

    def with_seed(self, seed: int | None) -> "Scenario":
        if seed is None:
            return self
        if not 0 <= seed < 2**64:
            raise ValidationError("scenario.seed: must fit in an unsigned 64-bit integer")
        return _replace(self, seed=seed)


def _replace(sc: Scenario, **kw) -> Scenario:
    return dataclasses.replace(sc, **kw)


def _labels(sec: _Section, raw: str) -> tuple[tuple[int, int, int], ...]:
    out = []
    for chunk in raw.split(";"):
        parts = chunk.replace(",", " ").split()
        if not parts:
            continue
        if len(parts) != 3:
            raise ValidationError(f"{sec.name}.states: each state is 'n ml s', got {chunk.strip()!r}")
        try:
            out.append(tuple(int(p) for p in parts))
        except ValueError:
            raise ValidationError(f"{sec.name}.states: non-integer quantum number in {chunk.strip()!r}") from None
    return tuple(out)


def _profile(sec: _Section) -> tuple[str, Profile]:
    name = sec.str("profile", "zero", PROFILES)
    if name == "zero":
        return name, Zero()
    amplitude = sec.float("amplitude", 1.0)
    if name == "constant_scalar":
        return name, ConstantScalar(amplitude)
    width = sec.float("width", _REQUIRED, positive=True)
    center = (sec.float("center_x", 0.0), sec.float("center_y", 0.0))
    cls = GaussianScalar if name == "gaussian_scalar" else GaussianMagnetic
    return name, cls(amplitude, width, center)


def parse(text: str, source: str = "<config>") -> Scenario:
    """Parse and validate a scenario from INI text."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValidationError(f"{source}: malformed config: {exc}") from None
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ValidationError(f"[{section}]: unknown section")
        unknown = set(cp[section]) - _SCHEMA[section]
        if unknown:
            raise ValidationError(f"{section}.{sorted(unknown)[0]}: unknown field")
    if "scenario" not in cp:
        raise ValidationError("[scenario]: section is required")
    s = _Section("scenario", dict(cp["scenario"]))
    if s.str("units", _REQUIRED) != "natural":
        raise ValidationError("scenario.units: must be 'natural' (hbar = c = e = 1)")
    methods = tuple(m.strip() for m in s.str("methods", "overlap").replace(",", " ").split())
    for m in methods:
        if m not in SIM_METHODS + ("perturbative",):
            raise ValidationError(f"scenario.methods: unknown method {m!r}")
    kw: dict = dict(name=s.str("name", Path(source).stem), methods=methods, seed=s.int("seed", 0, minimum=0))

    if "particle" in cp:
        p = _Section("particle", dict(cp["particle"]))
        kw["particle"] = _wrap(
            lambda: ParticleParams(p.float("mass", _REQUIRED, positive=True), p.float("field", _REQUIRED, positive=True), p.float("kz", 0.0))
        )
        kw["density"] = p.float("density", None, nonneg=True)
    if "perturbation" in cp:
        q = _Section("perturbation", dict(cp["perturbation"]))
        kw["profile_name"], kw["profile"] = _wrap(lambda: _profile(q))
        raw = q.str("strength", "0")
        kw["strength"] = "auto" if raw == "auto" else q.float("strength", 0.0)
        kw["target_loss"] = q.float("target_loss", 3e-3, positive=True)
        kw["frame"] = q.str("frame", "lab", ("lab", "rest"))
    if "truncation" in cp:
        t = _Section("truncation", dict(cp["truncation"]))
        spins = {"both": (1, -1), "up": (1,), "down": (-1,)}
        kw["truncation"] = _wrap(
            lambda: BasisTruncation(
                t.int("nu_max", _REQUIRED, minimum=0),
                t.int("ml_min", _REQUIRED),
                t.int("ml_max", _REQUIRED),
                spins[t.str("spins", "both", tuple(spins))],
                t.bool("negative_energy", False),
                t.int("max_dim", 4096, minimum=1),
            )
        )
    if "grid" in cp:
        g = _Section("grid", dict(cp["grid"]))
        kw["grid"] = _wrap(lambda: TransverseGrid(g.float("extent", _REQUIRED, positive=True), g.int("points", _REQUIRED)))
    if "initial" in cp:
        i = _Section("initial", dict(cp["initial"]))
        kind = i.str("kind", "label", ("label", "random", "beam"))
        if kind == "beam":
            labels = _labels(i, i.str("states", _REQUIRED))
            weights = i.floats("weights")
            if len(weights) != len(labels):
                raise ValidationError("initial.weights: need one weight per beam state")
            pt.BeamEnsemble(tuple(QuantumNumbers(*lab) for lab in labels), weights)
            kw["initial"] = InitialSpec(kind, labels, weights)
        else:
            lab = (i.int("n", 0, minimum=0), i.int("ml", 0), i.int("s", 1))
            kw["initial"] = InitialSpec(kind, (lab,), (1.0,))
    if "time" in cp:
        tm = _Section("time", dict(cp["time"]))
        kw["times"] = np.linspace(0.0, tm.float("t_max", _REQUIRED, positive=True), tm.int("samples", 201, minimum=2))
    if "fit" in cp:
        f = _Section("fit", dict(cp["fit"]))
        lo, hi = f.float("window_low", pt.FIT_WINDOW[0], positive=True), f.float("window_high", pt.FIT_WINDOW[1], positive=True)
        if not lo < hi < 1:
            raise ValidationError("fit.window_low: window must satisfy 0 < low < high < 1")
        kw["fit_window"] = (lo, hi)
        kw["boost_momenta"] = f.floats("boost_momenta")
        kw["boost_tol"] = f.float("boost_tol", 0.01, positive=True)
        kw["convergence_tol"] = f.float("convergence_tol", 0.01, positive=True)
    if "kg" in cp:
        kw["kg"] = _wrap(lambda: _kg(_Section("kg", dict(cp["kg"]))))
    if "output" in cp:
        kw["output"] = _Section("output", dict(cp["output"])).str("directory", None)
    sc = Scenario(**kw)
    _cross_validate(sc)
    return sc


def _wrap(build):
    try:
        return build()
    except ValidationError:
        raise
    except (TypeError, KeyError) as exc:
        raise ValidationError(str(exc)) from None


def _kg(k: _Section) -> KGConfig:
    grid = KGGrid(k.float("length", _REQUIRED, positive=True), k.int("points", _REQUIRED))
    return KGConfig(
        mass=k.float("mass", 1.0, positive=True),
        grid=grid,
        strength=k.float("strength", 0.0),
        amplitude=k.float("amplitude", 1.0),
        width=k.float("width", 1.0, positive=True),
        center=k.float("center", 0.0),
        packet_center=k.float("packet_center", 0.0),
        packet_width=k.float("packet_width", 2.0, positive=True),
        packet_momentum=k.float("packet_momentum", 0.0),
        times=np.linspace(0.0, k.float("t_max", _REQUIRED, positive=True), k.int("samples", 51, minimum=2)),
    )


def _cross_validate(sc: Scenario) -> None:
    if sc.particle is not None and sc.grid is not None:
        sc.grid.check_field(sc.particle.field)
    if sc.profile is not None and sc.grid is not None:
        check_resolution(sc.grid, sc.profile.length_scale)
    if sc.truncation is not None and sc.particle is not None:
        labels = sc.truncation.labels(sc.particle.kz)
        if sc.initial is not None:
            for lab in sc.initial.labels:
                q = _label(lab, sc.particle.kz)
                if q not in labels:
                    raise EmptyTruncation(f"initial: state (n={q.n}, ml={q.ml}, s={q.s}) lies outside the truncation")
    if sc.initial is not None and sc.initial.kind == "beam" and sc.particle is not None:
        E = [landau_energy(_label(lab, sc.particle.kz), sc.particle) for lab in sc.initial.labels]
        if max(E) - min(E) > pt.DEFAULT_DEGENERACY_TOL * abs(E[0]):
            raise ValidationError("initial.states: beam states must share one energy")


def _label(lab, kz: float) -> QuantumNumbers:
    n, ml, s = lab
    try:
        return QuantumNumbers(n, ml, s, kz)
    except ValidationError as exc:
        raise ValidationError(f"initial: {exc}") from None


def load(path: str | Path) -> Scenario:
    path = Path(path)
    return parse(path.read_text(), str(path))


# ---------------------------------------------------------------- pipelines


def _profile_at(sc: Scenario, kz: float, frame: str | None = None) -> Profile:
    frame = frame or sc.frame
    if frame == "rest" and kz != 0:
        return sc.profile.boosted(pt.boost_velocity(kz, sc.particle.mass))
    return sc.profile


def build_model(sc: Scenario, kz: float | None = None, strength: float | None = None, frame: str | None = None) -> HamiltonianModel:
    """Assemble the scenario Hamiltonian at momentum kz (default: the configured one)."""
    sc.require("particle", "profile", "truncation", "grid")
    kz = sc.particle.kz if kz is None else kz
    p = ParticleParams(sc.particle.mass, sc.particle.field, kz)
    eps = resolve_strength(sc) if strength is None else strength
    ref = None
    if sc.initial is not None and len(sc.initial.labels) == 1:
        ref = _label(sc.initial.labels[0], kz)
    return assemble(p, PerturbationField(_profile_at(sc, kz, frame), eps), sc.truncation, sc.grid, zero_diagonal_for=ref)


def resolve_strength(sc: Scenario) -> float:
    """Configured eps, or for ``auto`` the eps with eps^2 C t_max^2 = target_loss at rest."""
    if sc.strength != "auto":
        return float(sc.strength)
    sc.require("initial", "times")
    model = build_model(sc, kz=0.0, strength=0.0)
    C = _reference_c(sc, model)
    if C <= 0:
        raise ValidationError("perturbation.strength: 'auto' needs a nonzero degenerate coefficient C")
    return math.sqrt(sc.target_loss / C) / sc.times[-1]


def _reference_c(sc: Scenario, model: HamiltonianModel) -> float:
    if sc.initial.kind == "beam":
        return pt.beam_c(_ensemble(sc, model.basis.kz), model)
    return pt.c_coefficient(model, _label(sc.initial.labels[0], model.basis.kz)).value


def _ensemble(sc: Scenario, kz: float) -> pt.BeamEnsemble:
    return pt.BeamEnsemble(tuple(_label(lab, kz) for lab in sc.initial.labels), sc.initial.weights)


def initial_state(sc: Scenario, model: HamiltonianModel) -> np.ndarray:
    sc.require("initial")
    if sc.initial.kind == "beam":
        raise ValidationError("initial.kind: a beam is a mixture and has no single state vector")
    if sc.initial.kind == "random":
        rng = np.random.default_rng(sc.seed)
        v = rng.normal(size=model.dim) + 1j * rng.normal(size=model.dim)
        return v / np.linalg.norm(v)
    psi = np.zeros(model.dim, dtype=complex)
    psi[model.index(_label(sc.initial.labels[0], model.basis.kz))] = 1.0
    return psi


@dataclass(frozen=True)
class SpectrumLevel:
    energy: float
    nu: int
    states: tuple[QuantumNumbers, ...]

    @property
    def degeneracy(self) -> int:
        return len(self.states)


def spectrum(sc: Scenario) -> list[SpectrumLevel]:
    """Distinct energies in the truncation with their degenerate label sets."""
    sc.require("particle", "truncation")
    labels = sorted(sc.truncation.labels(sc.particle.kz), key=lambda q: (q.branch, q.nu, -q.s, q.ml))
    levels: list[SpectrumLevel] = []
    for q in labels:
        e = q.branch * landau_energy(q, sc.particle)
        if levels and abs(levels[-1].energy - e) <= pt.DEFAULT_DEGENERACY_TOL * abs(e):
            levels[-1] = SpectrumLevel(levels[-1].energy, levels[-1].nu, levels[-1].states + (q,))
        else:
            levels.append(SpectrumLevel(e, q.nu, (q,)))
    return levels


def simulate(sc: Scenario, model: HamiltonianModel | None = None, kz: float | None = None) -> list[FidelitySeries]:
    """Fidelity series for every simulation method requested in the scenario."""
    sc.require("times", "initial")
    model = model or build_model(sc, kz=kz)
    if sc.initial.kind == "beam":
        return [fidelity_ensemble(model, list(_ensemble(sc, model.basis.kz).states), sc.initial.weights, sc.times)]
    psi0 = initial_state(sc, model)
    out = []
    for m in sc.methods:
        if m == "overlap":
            out.append(fidelity_overlap(model, psi0, sc.times))
        elif m == "current":
            out.append(fidelity_current(model, psi0, sc.times))
        elif m == "ode":
            out.append(fidelity_ode(model, psi0, sc.times))
    if not out:
        out.append(fidelity_overlap(model, psi0, sc.times))
    return out


@dataclass(frozen=True)
class ConvergenceCheck:
    C: float
    C_enlarged: float
    tolerance: float

    @property
    def change(self) -> float:
        return abs(self.C_enlarged - self.C) / self.C if self.C > 0 else abs(self.C_enlarged)

    @property
    def converged(self) -> bool:
        return self.change <= self.tolerance


def truncation_convergence(sc: Scenario, model: HamiltonianModel) -> ConvergenceCheck:
    """Recompute C with one more level and two more ml values on each side.

    The enlarged basis is sampled on a grid 20% wider at the same spacing so
    the extra orbitals still decay inside it.
    """
    t = sc.truncation
    bigger = BasisTruncation(t.nu_max + 1, t.ml_min - 2, t.ml_max + 2, t.spins, t.include_negative_energy, t.max_dim)
    half = math.ceil(0.6 * sc.grid.points)
    wider = TransverseGrid(sc.grid.spacing * half, 2 * half)
    big = build_model(_replace(sc, truncation=bigger, grid=wider), kz=model.basis.kz, strength=model.strength)
    return ConvergenceCheck(_reference_c(sc, model), _reference_c(sc, big), sc.convergence_tol)


@dataclass
class BoostRow:
    k: float
    velocity: float
    expected: float
    c_ratio: float
    c_ratio_lab_static: float
    report: pt.BoostReport | None
    compton: pt.ComptonReport


@dataclass
class PerturbativeResult:
    strength: float
    C: float
    coefficient: pt.CorrelationCoefficient | None
    prediction: FidelitySeries
    simulated: FidelitySeries | None
    fit: pt.DecayFit | None
    convergence: ConvergenceCheck | None
    oscillatory_bound: float | None
    crossover_time: float | None
    boosts: list[BoostRow]
    prediction_k: float = 0.0
    mass: float = 1.0

    @property
    def predicted_coefficient(self) -> float:
        v = pt.boost_velocity(self.prediction_k, self.mass)
        return self.strength**2 * self.C * (1 - v * v)

    @property
    def fit_error(self) -> float | None:
        if self.fit is None or self.predicted_coefficient == 0:
            return None
        return abs(self.fit.coefficient / self.predicted_coefficient - 1.0)


def perturbative(sc: Scenario, fit: bool = True, convergence: bool = True) -> PerturbativeResult:
    """C for the initial state or beam, the predicted law and, with ``fit``, the simulated comparison.

    C is taken at rest and the predicted law carries the (1 - v^2) factor for
    the configured kz; a rest-frame perturbation makes this exact.
    """
    sc.require("particle", "profile", "truncation", "grid", "initial", "times")
    eps = resolve_strength(sc)
    kz, m = sc.particle.kz, sc.particle.mass
    rest = build_model(sc, kz=0.0, strength=eps)
    C = _reference_c(sc, rest)
    coef = None
    bound = cross = None
    if sc.initial.kind != "beam":
        ref = _label(sc.initial.labels[0], 0.0)
        coef = pt.c_coefficient(rest, ref)
        bound = pt.oscillatory_bound(rest, ref)
        cross = pt.crossover_time(rest, ref)
    prediction = pt.predicted_series(C, eps, kz, m, sc.times)
    simulated = fitted = None
    if fit and eps != 0 and C > 0:
        model = rest if kz == 0 else build_model(sc, strength=eps)
        simulated = simulate(_replace(sc, methods=("overlap",)), model)[0]
        fitted = pt.fit_decay(simulated, sc.fit_window)
    conv = truncation_convergence(sc, rest) if convergence and C > 0 else None
    if conv is not None and not conv.converged:
        warnings.warn(f"C changed by {conv.change:.2e} when the truncation was enlarged", RuntimeWarning, stacklevel=2)
    boosts = []
    for k in sc.boost_momenta:
        compton = pt.compton_guard(k, m, sc.density)
        boosted = build_model(sc, kz=k, strength=eps)
        static = build_model(sc, kz=k, strength=eps, frame="lab")
        c_k, c_static = _reference_c(sc, boosted), _reference_c(sc, static)
        report = None
        if fit and eps != 0 and C > 0:
            s_k = simulate(_replace(sc, methods=("overlap",)), boosted)[0]
            s_0 = simulate(_replace(sc, methods=("overlap",)), rest)[0]
            report = pt.boost_check(s_k, s_0, k, m, sc.boost_tol, sc.fit_window)
        v = pt.boost_velocity(k, m)
        boosts.append(BoostRow(k, v, 1 - v * v, c_k / C if C else math.nan, c_static / C if C else math.nan, report, compton))
    return PerturbativeResult(eps, C, coef, prediction, simulated, fitted, conv, bound, cross, boosts, kz, m)


@dataclass
class KGResult:
    direct: KGSeries
    kernel: KGSeries

    @property
    def max_difference(self) -> float:
        return float(np.abs(self.direct.f - self.kernel.f).max())


def kg(sc: Scenario) -> KGResult:
    sc.require("kg")
    c = sc.kg
    state = c.initial_state()
    direct = kg_fidelity(state, c.times, c.mass, c.strength, c.potential)
    pert = KGPropagatorMatrix(c.grid, c.mass, c.strength, c.potential)
    free = KGPropagatorMatrix(c.grid, c.mass, 0.0, None)
    f = np.array([
        kg_echo_kernel(t, c.mass, c.strength, c.potential, c.grid, propagators=(pert, free)).contract(state.phi)
        for t in c.times
    ])
    return KGResult(direct, KGSeries(c.times, f, "kg_kernel"))
