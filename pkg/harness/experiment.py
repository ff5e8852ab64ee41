"""
Experiment configuration: dataclass tree, key/value file grammar and presets

File grammar (parsed with python-dotenv): one `section.key=value` per line,
`#` comments, blank lines ignored. Empty values mean "use the default derived
from the geometry" for the optional solver fields. Example:

    # [medium]
    medium.lam=1.0
    medium.mu=1.0
    medium.omega=20.0
"""

import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from dotenv import dotenv_values
from loguru import logger

from src.errors import ConfigError, ElastoScanError
from src.forward import SolverParams
from src.imaging import PolarizationMode, SamplingGrid
from src.medium_geom import (
    DirectionGrid, ElasticMedium, MeasurementLine, SurfaceProfile, surface_registry,
)
from src.synthkit import GRANULARITIES, SCOPES, NoiseSpec


@dataclass
class SurfaceSection:
    id: str = 'f2'
    expr: str = ''
    split: Optional[float] = None
    expr_right: str = ''


@dataclass
class MediumSection:
    lam: float = 1.0
    mu: float = 1.0
    omega: float = 20.0


@dataclass
class MeasurementSection:
    a: float = 2.0
    A: float = 8.0
    N: int = 200


@dataclass
class DirectionsSection:
    M: int = 256


@dataclass
class SolverSection:
    nodes_per_wavelength: float = 10.0
    half_width: Optional[float] = None
    taper_start: Optional[float] = None
    taper_width: Optional[float] = None
    eta_re: Optional[float] = None
    eta_im: float = 0.0
    node_count: Optional[int] = None


@dataclass
class SamplingSection:
    z1_min: float = -5.0
    z1_max: float = 5.0
    z2_min: float = 0.0
    z2_max: float = 1.2
    G1: int = 201
    G2: int = 61


@dataclass
class NoiseSection:
    delta: float = 0.0
    seed: int = 20240607
    granularity: str = 'component'
    scope: str = 'direction'


@dataclass
class ImagingSection:
    mode: str = 'Both'
    mirror_weight: complex = 1 + 0j
    window: float = 4.0


@dataclass
class OutputSection:
    directory: str = './results'
    heatmap: bool = True
    check_oracle: bool = False
    export_csv: bool = False


SECTIONS = ('surface', 'medium', 'measurement', 'directions', 'solver', 'sampling', 'noise', 'imaging', 'output')


@dataclass
class ExperimentConfig:
    surface: SurfaceSection = field(default_factory=SurfaceSection)
    medium: MediumSection = field(default_factory=MediumSection)
    measurement: MeasurementSection = field(default_factory=MeasurementSection)
    directions: DirectionsSection = field(default_factory=DirectionsSection)
    solver: SolverSection = field(default_factory=SolverSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    imaging: ImagingSection = field(default_factory=ImagingSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- domain objects -----------------------------------------------------

    def surface_profile(self) -> SurfaceProfile:
        custom = None
        if self.surface.expr:
            custom = {'expr': self.surface.expr, 'split': self.surface.split,
                      'expr_right': self.surface.expr_right or None}
        return surface_registry(self.surface.id, custom)

    def elastic_medium(self) -> ElasticMedium:
        return ElasticMedium(self.medium.lam, self.medium.mu, self.medium.omega)

    def measurement_line(self) -> MeasurementLine:
        return MeasurementLine(self.measurement.a, self.measurement.A, self.measurement.N)

    def direction_grid(self) -> DirectionGrid:
        return DirectionGrid(self.directions.M)

    def solver_params(self, threads: int = 0) -> SolverParams:
        s = self.solver
        eta = None if s.eta_re is None else complex(s.eta_re, s.eta_im)
        return SolverParams(s.nodes_per_wavelength, s.half_width, s.taper_start, s.taper_width,
                            eta, s.node_count, threads)

    def sampling_grid(self) -> SamplingGrid:
        s = self.sampling
        return SamplingGrid(s.z1_min, s.z1_max, s.z2_min, s.z2_max, s.G1, s.G2)

    def noise_spec(self) -> NoiseSpec:
        n = self.noise
        return NoiseSpec(n.delta, n.seed, n.granularity, n.scope)

    def polarization(self) -> PolarizationMode:
        return PolarizationMode.parse(self.imaging.mode)

    def forward_key(self) -> str:
        """Serialized form of the sections that determine the dataset"""
        keep = ('surface', 'medium', 'measurement', 'directions', 'solver')
        return '\n'.join(line for line in serialize(self).splitlines()
                         if line.split('.', 1)[0] in keep)

    # -- validation ---------------------------------------------------------

    def problems(self) -> List[str]:
        found = []
        m, meas = self.medium, self.measurement
        if m.omega <= 0:
            found.append(f"medium.omega must be > 0 (got {m.omega})")
        if m.mu <= 0:
            found.append(f"medium.mu must be > 0 (got {m.mu})")
        if m.lam + m.mu < 0:
            found.append("medium.lam + medium.mu must be >= 0")
        if meas.A <= 0:
            found.append(f"measurement.A must be > 0 (got {meas.A})")
        if meas.N < 1:
            found.append(f"measurement.N must be >= 1 (got {meas.N})")
        if self.directions.M < 2 or self.directions.M % 2:
            found.append(f"directions.M must be even and >= 2 (got {self.directions.M})")
        if self.solver.nodes_per_wavelength < 10:
            found.append(f"solver.nodes_per_wavelength must be >= 10 (got {self.solver.nodes_per_wavelength})")
        if self.solver.node_count is not None and (self.solver.node_count < 4 or self.solver.node_count % 2):
            found.append(f"solver.node_count must be even and >= 4 (got {self.solver.node_count})")
        if self.solver.eta_re is not None and self.solver.eta_re <= 0:
            found.append(f"solver.eta_re must be > 0 (got {self.solver.eta_re})")
        s = self.sampling
        if s.G1 < 2 or s.G2 < 2:
            found.append(f"sampling.G1 and sampling.G2 must be >= 2 (got {s.G1}, {s.G2})")
        if s.z1_max <= s.z1_min or s.z2_max <= s.z2_min:
            found.append("sampling rectangle must have positive extent")
        n = self.noise
        if n.delta < 0:
            found.append(f"noise.delta must be >= 0 (got {n.delta})")
        if n.granularity not in GRANULARITIES:
            found.append(f"noise.granularity must be one of {', '.join(GRANULARITIES)} (got {n.granularity})")
        if n.scope not in SCOPES:
            found.append(f"noise.scope must be one of {', '.join(SCOPES)} (got {n.scope})")
        if self.imaging.mode.lower() not in ('e1', 'e2', 'both'):
            found.append(f"imaging.mode must be E1, E2 or Both (got {self.imaging.mode})")

        try:
            profile = self.surface_profile()
            if meas.a <= profile.f_sup:
                found.append(f"measurement.a={meas.a} must exceed sup f = {profile.f_sup:.6g} "
                             f"of surface '{profile.id}'")
        except (ElastoScanError, KeyError, ValueError) as e:
            found.append(f"surface: {e}")
        return found

    def validate(self) -> 'ExperimentConfig':
        found = self.problems()
        if found:
            for problem in found:
                logger.error(f"Config: {problem}")
            raise ConfigError(found)
        return self


# ---------------------------------------------------------------------------
# Parse / serialize
# ---------------------------------------------------------------------------

def _convert(raw: str, hint, key: str):
    optional = get_origin(hint) is Union and type(None) in get_args(hint)
    target = next(a for a in get_args(hint) if a is not type(None)) if optional else hint
    raw = raw.strip() if raw is not None else ''
    if raw == '' and optional:
        return None
    try:
        if target is bool:
            lowered = raw.lower()
            if lowered not in ('true', 'false', '1', '0', 'yes', 'no'):
                raise ValueError(raw)
            return lowered in ('true', '1', 'yes')
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
        if target is complex:
            return complex(raw.replace(' ', ''))
        return raw
    except ValueError:
        raise ConfigError([f"{key}: cannot read '{raw}' as {target.__name__}"])


def _format(value) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, complex):
        return repr(value.real) if value.imag == 0 else repr(value).strip('()')
    return str(value)


def from_mapping(values: Dict[str, Optional[str]], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Apply `section.key` string values on top of base (defaults when omitted)"""
    config = base or ExperimentConfig()
    problems = []
    updates: Dict[str, Dict[str, object]] = {}
    for key, raw in values.items():
        section, _, name = key.partition('.')
        if section not in SECTIONS or not name:
            problems.append(f"unknown key '{key}'")
            continue
        hints = get_type_hints(type(getattr(config, section)))
        if name not in hints:
            problems.append(f"unknown key '{key}'")
            continue
        try:
            updates.setdefault(section, {})[name] = _convert(raw, hints[name], key)
        except ConfigError as e:
            problems.extend(e.problems)
    if problems:
        raise ConfigError(problems)
    changes = {section: replace(getattr(config, section), **fields_) for section, fields_ in updates.items()}
    return replace(config, **changes)


def parse(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    return from_mapping(dotenv_values(stream=io.StringIO(text), interpolate=False), base)


def load(path, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    logger.info(f"Loading experiment config: {path}")
    return from_mapping(dotenv_values(path, interpolate=False), base)


def serialize(config: ExperimentConfig) -> str:
    lines = []
    for section in SECTIONS:
        lines.append(f"# [{section}]")
        block = getattr(config, section)
        for f in fields(block):
            lines.append(f"{section}.{f.name}={_format(getattr(block, f.name))}")
        lines.append('')
    return '\n'.join(lines)


def save(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize(config))
    return path


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _preset_table() -> Dict[str, Dict[str, str]]:
    table: Dict[str, Dict[str, str]] = {}
    for suffix, omega in zip('abc', ('15', '20', '25')):
        table[f'fig3-{suffix}'] = {'surface.id': 'f1', 'medium.omega': omega, 'noise.delta': '0.2'}
    for suffix, a in zip('abc', ('1.1', '2.0', '2.9')):
        table[f'fig4-{suffix}'] = {'surface.id': 'f2', 'measurement.a': a, 'noise.delta': '0.2'}
    for suffix, A in zip('abc', ('5', '8', '11')):
        table[f'fig5-{suffix}'] = {'surface.id': 'f3', 'measurement.A': A, 'noise.delta': '0.2'}
    for suffix, delta in zip('abc', ('0', '0.2', '0.4')):
        table[f'fig6-{suffix}'] = {'surface.id': 'f4', 'noise.delta': delta}
    for suffix, mode in zip('abc', ('E1', 'E2', 'Both')):
        table[f'fig7-{suffix}'] = {'surface.id': 'f2', 'imaging.mode': mode}
    table['flat'] = {'surface.id': 'flat', 'output.check_oracle': 'true'}
    return table


PRESETS = _preset_table()


def preset(name: str) -> ExperimentConfig:
    """Named study configuration (fig3-a .. fig7-c, flat)"""
    if name not in PRESETS:
        raise ConfigError([f"unknown preset '{name}' (known: {', '.join(sorted(PRESETS))})"])
    config = from_mapping(PRESETS[name])
    return replace(config, output=replace(config.output, directory=f"./results/{name}"))
