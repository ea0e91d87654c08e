"""Run configuration files: ``key = value`` lines grouped in ``[sections]``.

Unknown sections or keys are errors. Relative paths resolve against the
directory of the configuration file. Field values use a small grammar::

    zero                      all zeros
    constant 2.5              one value everywhere except the frame
    block i0 i1 j0 j1 10.0    value on the half-open index block
    sine 2.0                  2.0 * sin(pi x) sin(pi y) at cell centers
    file data.csv             field CSV (i,j,value)
    planted mask.txt          Poisson solution of the source on that mask (z only)

Mask values are ``full``, ``block i0 i1 j0 j1`` (several separated by ``;``)
or a path to a mask text file.
"""
from __future__ import annotations

import configparser
import dataclasses
import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from turnpike.costs import TrackingTarget
from turnpike.domain import AdmissibleClass, DomainMask
from turnpike.errors import ConfigError, InvalidMaskError
from turnpike.experiments import SweepConfig
from turnpike.fields import GridSpec, ScalarField, parse_length
from turnpike.optimizer import AnnealSchedule
from turnpike.pde_core import solve_poisson

SCHEMA: Dict[str, set] = {
    'run': {'seed'},
    'grid': {'nx', 'ny', 'h', 'origin', 'unit_square'},
    'class': {'omega', 'max_components'},
    'data': {'f', 'y0', 'z'},
    'anneal': {'initial_temperature', 'relative', 'cooling', 'steps_per_temperature', 'budget',
               'nucleation_rate'},
    'parabolic_anneal': {'initial_temperature', 'relative', 'cooling', 'steps_per_temperature',
                         'budget', 'nucleation_rate'},
    'sweep': {'horizons', 'restarts', 'min_steps', 'dt_cap', 'init_flips', 'parabolic_init', 'polish'},
    'solve': {'mask', 'equation', 'T', 'dt', 'stride'},
    'optimize': {'problem', 'horizon', 'init', 'polish'},
    'probe': {'base', 'corner', 'sizes'},
}


@dataclasses.dataclass
class RunConfig:
    """Parsed configuration file; section contents stay as raw strings until used."""
    path: Path
    sections: Dict[str, Dict[str, str]]
    seed: int = 0

    @property
    def base_dir(self) -> Path:
        return self.path.parent

    def has(self, section: str, key: Optional[str] = None) -> bool:
        if section not in self.sections:
            return False
        return key is None or key in self.sections[section]

    def get(self, section: str, key: str, default: Optional[str] = None) -> str:
        try:
            return self.sections[section][key]
        except KeyError:
            if default is not None:
                return default
            raise ConfigError(f'missing key [{section}] {key} in {self.path}') from None

    def resolve(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p

    # -- typed accessors --------------------------------------------------

    def number(self, section: str, key: str, default: Optional[str] = None, kind=float):
        raw = self.get(section, key, default)
        try:
            return kind(parse_length(raw)) if kind is float else kind(raw)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f'[{section}] {key}: cannot parse {raw!r}') from None

    def flag(self, section: str, key: str, default: str = 'false') -> bool:
        raw = self.get(section, key, default).strip().lower()
        if raw in ('1', 'true', 'yes', 'on'):
            return True
        if raw in ('0', 'false', 'no', 'off'):
            return False
        raise ConfigError(f'[{section}] {key}: expected a boolean, got {raw!r}')

    def grid(self) -> GridSpec:
        try:
            if self.has('grid', 'unit_square'):
                return GridSpec.unit_square(self.number('grid', 'unit_square', kind=int))
            origin = tuple(parse_length(t) for t in self.get('grid', 'origin', '0 0').split())
            return GridSpec(self.number('grid', 'nx', kind=int), self.number('grid', 'ny', kind=int),
                            self.number('grid', 'h'), origin)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f'[grid]: {exc}') from None

    def mask(self, section: str, key: str, grid: GridSpec, default: Optional[str] = None) -> DomainMask:
        spec = self.get(section, key, default).strip()
        try:
            if spec == 'full':
                return DomainMask.full_interior(grid)
            if spec.startswith('block'):
                blocks = []
                for part in spec.split(';'):
                    tok = part.split()
                    if len(tok) != 5 or tok[0] != 'block':
                        raise ConfigError(f'[{section}] {key}: bad block spec {part.strip()!r}')
                    blocks.append(tuple(int(t) for t in tok[1:]))
                return DomainMask.from_blocks(grid, blocks)
            path = self.resolve(spec.split(maxsplit=1)[1] if spec.startswith('file ') else spec)
            if not path.is_file():
                raise ConfigError(f'[{section}] {key}: mask file not found: {path}')
            mask = DomainMask.from_text(path.read_text())
        except InvalidMaskError as exc:
            raise ConfigError(f'[{section}] {key}: {exc}') from None
        if mask.grid != grid:
            raise ConfigError(f'[{section}] {key}: mask grid {mask.grid} differs from [grid] {grid}')
        return mask

    def field(self, key: str, grid: GridSpec, f: Optional[ScalarField] = None) -> ScalarField:
        spec = self.get('data', key, 'zero').split()
        kind, args = spec[0], spec[1:]
        try:
            if kind == 'zero':
                return ScalarField.zeros(grid)
            if kind == 'constant':
                return ScalarField(grid, float(args[0]) * ~grid.frame())
            if kind == 'block':
                i0, i1, j0, j1 = (int(a) for a in args[:4])
                values = np.zeros(grid.shape)
                values[j0:j1, i0:i1] = float(args[4])
                values[grid.frame()] = 0.0
                return ScalarField(grid, values)
            if kind == 'sine':
                X, Y = grid.cell_centers()
                values = float(args[0]) * np.sin(np.pi * X) * np.sin(np.pi * Y)
                values[grid.frame()] = 0.0
                return ScalarField(grid, values)
            if kind == 'file':
                path = self.resolve(args[0])
                if not path.is_file():
                    raise ConfigError(f'[data] {key}: field file not found: {path}')
                return ScalarField.from_csv(path.read_text(), grid)
            if kind == 'planted':
                if f is None:
                    raise ConfigError(f'[data] {key}: planted target needs the source f')
                path = self.resolve(args[0])
                if not path.is_file():
                    raise ConfigError(f'[data] {key}: mask file not found: {path}')
                planted = DomainMask.from_text(path.read_text())
                if planted.grid != grid:
                    raise ConfigError(f'[data] {key}: planted mask grid differs from [grid]')
                return solve_poisson(planted, f)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f'[data] {key}: cannot parse {" ".join(spec)!r} ({exc})') from None
        raise ConfigError(f'[data] {key}: unknown field kind {kind!r}')

    def admissible_class(self, grid: GridSpec) -> AdmissibleClass:
        omega = self.mask('class', 'omega', grid)
        return AdmissibleClass(omega, self.number('class', 'max_components', '1', kind=int))

    def target(self, grid: GridSpec, omega: DomainMask) -> TrackingTarget:
        f = self.field('f', grid)
        y0 = self.field('y0', grid)
        z = self.field('z', grid, f=f)
        try:
            return TrackingTarget(z, omega, f, y0)
        except ValueError as exc:
            raise ConfigError(f'[data]: {exc}') from None

    def schedule(self, section: str = 'anneal') -> AnnealSchedule:
        s = section
        try:
            return AnnealSchedule(
                initial_temperature=self.number(s, 'initial_temperature', '0.01'),
                cooling=self.number(s, 'cooling', '0.8'),
                steps_per_temperature=self.number(s, 'steps_per_temperature', '250', kind=int),
                budget=self.number(s, 'budget', '2000', kind=int),
                seed=self.seed,
                relative=self.flag(s, 'relative', 'true'),
                nucleation_rate=self.number(s, 'nucleation_rate', '0.05'))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f'[{s}]: {exc}') from None

    def sweep_config(self, output_dir: Optional[str] = None, jobs: int = 1) -> SweepConfig:
        grid = self.grid()
        cls = self.admissible_class(grid)
        target = self.target(grid, cls.omega)
        dt_cap = self.get('sweep', 'dt_cap', 'h')
        try:
            horizons = tuple(parse_length(t) for t in self.get('sweep', 'horizons').split())
            return SweepConfig(
                cls, target, horizons, self.schedule('anneal'),
                restarts=self.number('sweep', 'restarts', '5', kind=int), seed=self.seed,
                parabolic_schedule=(self.schedule('parabolic_anneal')
                                    if self.has('parabolic_anneal') else None),
                init_flips=self.number('sweep', 'init_flips', '0', kind=int),
                parabolic_init=self.get('sweep', 'parabolic_init', 'elliptic'),
                polish=self.flag('sweep', 'polish', 'true'),
                min_steps=self.number('sweep', 'min_steps', '64', kind=int),
                dt_cap=None if dt_cap == 'h' else parse_length(dt_cap),
                output_dir=output_dir, jobs=jobs)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f'[sweep]: {exc}') from None


def load_config(path, seed: Optional[int] = None) -> RunConfig:
    """Parse and validate a configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'config file not found: {path}')
    parser = configparser.ConfigParser(inline_comment_prefixes=('#', ';;'), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f'{path}: {exc}') from None
    sections = {}
    for name in parser.sections():
        if name not in SCHEMA:
            raise ConfigError(f'{path}: unknown section [{name}]')
        unknown = set(parser[name]) - SCHEMA[name]
        if unknown:
            raise ConfigError(f'{path}: unknown key(s) in [{name}]: {", ".join(sorted(unknown))}')
        sections[name] = dict(parser[name])
    cfg = RunConfig(path.resolve(), sections)
    if seed is not None:
        cfg.seed = int(seed)
    elif cfg.has('run', 'seed'):
        cfg.seed = cfg.number('run', 'seed', kind=int)
    return cfg


def load_sweep_config(path, seed: Optional[int] = None, output_dir=None, jobs: int = 1) -> SweepConfig:
    """Build a sweep from a ``.ini`` config or from a previous run's ``manifest.json``."""
    path = Path(path)
    if path.suffix == '.json':
        if not path.is_file():
            raise ConfigError(f'manifest not found: {path}')
        try:
            manifest = json.loads(path.read_text())
            d = manifest['config']
        except (ValueError, KeyError) as exc:
            raise ConfigError(f'{path}: not a run manifest ({exc})') from None
        if seed is not None:
            d = dict(d, seed=int(seed))
        return SweepConfig.from_dict(d, output_dir, jobs)
    return load_config(path, seed).sweep_config(output_dir, jobs)
