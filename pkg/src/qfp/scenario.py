"""Scenario files: INI-style ``key = value`` lines grouped in sections.

Example::

    [scenario]
    name = rabi
    stage = evolve

    [system]
    fixture = two-level
    delta = 1.0

    [initial]
    basis = 0

    [numerics]
    t = 6.0
    samples = 121

Sections and keys
-----------------
``[scenario]``  name, stage (evolve | master | diffusion | fp | pathint | entropy | emergence)
``[system]``    fixture = two-level (delta, bias) | tight-binding (n, hop) |
                harmonic (k_min, k_max, n, mass, omega) | matrix (rows separated
                by ``;``, entries by whitespace or commas, complex like ``1+2j``);
                hbar
``[initial]``   one of basis, amplitudes, populations, delta_at, gaussian (mean, var)
``[numerics]``  t, steps, samples, dt, scheme, flux (central | fitted), kernel_slices ...
``[diffusion]`` d, spacing, half_width, periodic
``[grid]``      k_min, k_max and n or dk
``[field]``     fixture = ou (gamma, d) | double-well (d) | constant (mu, d) | table (csv)
``[pathint]``   potential = harmonic (omega) | free | table (csv); mass, t, slices, kinetic
``[output]``    dir
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fokker_planck import DriftDiffusionField, Grid1D, constant_field, double_well_field, ou_field
from .io import read_field_csv, read_potential_csv
from .linalg import HermitianOperator
from .path_integral import PotentialOnGrid, discretized_hamiltonian

STAGES = ("evolve", "master", "diffusion", "fp", "pathint", "entropy", "emergence")


@dataclass
class Scenario:
    name: str
    stage: str
    sections: dict[str, dict[str, str]]
    base_dir: Path = field(default_factory=Path.cwd)

    def section(self, name: str) -> dict[str, str]:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default=None):
        return self.section(section).get(key, default)

    def require(self, section: str, key: str) -> str:
        val = self.get(section, key)
        if val is None:
            raise ValidationError(f"scenario {self.name!r}: missing [{section}] {key}")
        return val

    def float(self, section, key, default=None) -> float:
        val = self.get(section, key)
        if val is None:
            if default is None:
                raise ValidationError(f"scenario {self.name!r}: missing [{section}] {key}")
            return float(default)
        try:
            return float(val)
        except ValueError:
            raise ValidationError(f"[{section}] {key}: expected a number, got {val!r}") from None

    def int(self, section, key, default=None) -> int:
        val = self.get(section, key)
        if val is None:
            if default is None:
                raise ValidationError(f"scenario {self.name!r}: missing [{section}] {key}")
            return int(default)
        try:
            return int(val)
        except ValueError:
            raise ValidationError(f"[{section}] {key}: expected an integer, got {val!r}") from None

    def bool(self, section, key, default=False) -> bool:
        val = self.get(section, key)
        if val is None:
            return default
        v = val.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"[{section}] {key}: expected a boolean, got {val!r}")

    def path(self, section, key) -> Path:
        p = Path(self.require(section, key))
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        return {s: dict(v) for s, v in self.sections.items()}


def parse_scenario_text(text: str, base_dir=None) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed scenario file: {exc}") from None
    sections = {s: {k: v.strip() for k, v in cp.items(s)} for s in cp.sections()}
    head = sections.get("scenario", {})
    name = head.get("name")
    stage = head.get("stage")
    if not name:
        raise ValidationError("scenario needs [scenario] name")
    if stage not in STAGES:
        raise ValidationError(f"[scenario] stage must be one of {STAGES}, got {stage!r}")
    return Scenario(name, stage, sections, Path(base_dir) if base_dir else Path.cwd())


def load_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_scenario_text(text, base_dir=path.parent)


def parse_vector(text: str, dtype=complex) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        return np.array([dtype(p) for p in parts])
    except ValueError:
        raise ValidationError(f"cannot parse vector {text!r}") from None


def parse_matrix(text: str) -> np.ndarray:
    rows = [parse_vector(r) for r in text.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError("matrix rows must all have the same length")
    return np.array(rows)


# -- system construction ---------------------------------------------------


@dataclass
class System:
    h: HermitianOperator
    hbar: float = 1.0
    grid: Grid1D | None = None
    potential: PotentialOnGrid | None = None
    mass: float = 1.0


def tight_binding(n: int, hop: float) -> np.ndarray:
    """Open chain, site basis: H = -hop sum_j (|j><j+1| + h.c.)."""
    if n < 2:
        raise ValidationError("tight-binding chain needs n >= 2")
    return -hop * (np.eye(n, k=1) + np.eye(n, k=-1))


def build_grid(s: Scenario, section: str) -> Grid1D:
    k_min = s.float(section, "k_min")
    k_max = s.float(section, "k_max")
    if s.get(section, "n") is not None:
        return Grid1D(k_min, k_max, s.int(section, "n"))
    return Grid1D.from_spacing(k_min, k_max, s.float(section, "dk"))


def build_system(s: Scenario) -> System:
    fixture = s.require("system", "fixture")
    hbar = s.float("system", "hbar", 1.0)
    if fixture == "two-level":
        delta = s.float("system", "delta")
        bias = s.float("system", "bias", 0.0)
        return System(HermitianOperator([[bias / 2, delta], [delta, -bias / 2]]), hbar)
    if fixture == "tight-binding":
        return System(HermitianOperator(tight_binding(s.int("system", "n"), s.float("system", "hop"))), hbar)
    if fixture == "harmonic":
        grid = build_grid(s, "system")
        mass = s.float("system", "mass", 1.0)
        omega = s.float("system", "omega", 1.0)
        v = PotentialOnGrid(grid, 0.5 * mass * omega**2 * grid.nodes**2)
        return System(discretized_hamiltonian(grid, v, mass, hbar), hbar, grid, v, mass)
    if fixture == "matrix":
        return System(HermitianOperator(parse_matrix(s.require("system", "matrix"))), hbar)
    raise ValidationError(f"unknown [system] fixture {fixture!r}")


def initial_amplitudes(s: Scenario, dim: int) -> np.ndarray | None:
    """Pure initial state from [initial] basis/amplitudes, else None."""
    if s.get("initial", "basis") is not None:
        idx = s.int("initial", "basis")
        if not 0 <= idx < dim:
            raise ValidationError(f"[initial] basis index {idx} outside 0..{dim - 1}")
        a = np.zeros(dim, complex)
        a[idx] = 1.0
        return a
    if s.get("initial", "amplitudes") is not None:
        a = parse_vector(s.require("initial", "amplitudes"))
        if a.size != dim:
            raise ValidationError(f"[initial] amplitudes has {a.size} entries, system has {dim}")
        norm = np.linalg.norm(a)
        if norm == 0:
            raise ValidationError("[initial] amplitudes are all zero")
        return a / norm
    return None


def initial_density_matrix(s: Scenario, dim: int) -> np.ndarray:
    a = initial_amplitudes(s, dim)
    if a is not None:
        return np.outer(a, a.conj())
    if s.get("initial", "populations") is not None:
        p = parse_vector(s.require("initial", "populations"), float)
        if p.size != dim or p.min() < 0 or p.sum() <= 0:
            raise ValidationError("[initial] populations must be nonnegative with one entry per state")
        return np.diag(p / p.sum()).astype(complex)
    raise ValidationError("scenario needs [initial] basis, amplitudes or populations")


def build_field(s: Scenario) -> DriftDiffusionField:
    fixture = s.require("field", "fixture")
    if fixture == "ou":
        return ou_field(s.float("field", "gamma", 1.0), s.float("field", "d", 1.0))
    if fixture == "double-well":
        return double_well_field(s.float("field", "d", 0.25))
    if fixture == "constant":
        return constant_field(s.float("field", "mu", 0.0), s.float("field", "d", 0.5))
    if fixture == "table":
        return DriftDiffusionField.from_table(*read_field_csv(s.path("field", "csv")))
    raise ValidationError(f"unknown [field] fixture {fixture!r}")


def build_potential(s: Scenario, grid: Grid1D, mass: float) -> PotentialOnGrid:
    kind = s.get("pathint", "potential", "harmonic")
    if kind == "harmonic":
        omega = s.float("pathint", "omega", 1.0)
        return PotentialOnGrid(grid, 0.5 * mass * omega**2 * grid.nodes**2)
    if kind == "free":
        return PotentialOnGrid.zero(grid)
    if kind == "table":
        k, v = read_potential_csv(s.path("pathint", "csv"))
        return PotentialOnGrid(grid, np.interp(grid.nodes, k, v))
    raise ValidationError(f"unknown [pathint] potential {kind!r}")
