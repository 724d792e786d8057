"""
Run configuration documents.

A run config is one JSON object with up to three sections:

    {
      "game":   {"players": [{"mu_s": 1, "mu_r": 2}, ...], "r_s": 1,
                 "model": {"family": "exponential", "A": 5, "B": 0.5}},
      "solver": {"tol_brd": 1e-9, "schedule": "sequential", ...},
      "sweep":  {"n_players": 6, "rho_grid": [0, 0.1], ...}
    }

Unknown keys are rejected at every level. Errors carry the dotted field path
(or the decoder's line and column for malformed JSON). See CONFIG_FORMAT.md.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from src.config.settings import SolverSettings
from src.experiments.team_sampler import SweepSpec
from src.models.errors import ConfigError, StructuralError
from src.models.game_core import DEFAULT_R_S, GameConfig, PlayerParams
from src.models.return_models import MODEL_FAMILIES, ReturnModel, build_return_model

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {'game', 'solver', 'sweep'}
GAME_KEYS = {'players', 'r_s', 'model'}
PLAYER_KEYS = {'mu_s', 'mu_r'}
MODEL_KEYS = {
    'exponential': {'family', 'A', 'B'},
    'rational': {'family', 'A', 'B', 'C'},
}
SOLVER_TYPES = {
    'tol_brd': float, 'tol_stat': float, 'tol_verify': float, 'max_iters': int,
    'schedule': str, 'relaxation': float, 'threads': int, 'validation_grid': int,
}
SWEEP_KEYS = {'n_players', 'mean_mu_s', 'mean_mu_r', 'rho_grid', 'trials_per_rho', 'seed', 'model', 'r_s'}


@dataclass
class RunConfig:
    game: Optional[GameConfig]
    solver: SolverSettings
    sweep: Optional[SweepSpec]
    source: str = '<memory>'

    def require_game(self) -> GameConfig:
        if self.game is None:
            raise ConfigError("this command needs a 'game' section", field='game')
        return self.game

    def require_sweep(self) -> SweepSpec:
        if self.sweep is None:
            raise ConfigError("this command needs a 'sweep' section", field='sweep')
        return self.sweep


def _object(value: Any, path: str) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(f"expected an object, got {type(value).__name__}", field=path)
    return value


def _reject_unknown(section: Dict[str, Any], allowed: set, path: str) -> None:
    for key in section:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key '{key}'", field=where)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", field=path)
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", field=path)
    return value


def _positive(value: Any, path: str) -> float:
    number = _number(value, path)
    if number <= 0:
        raise ConfigError(f"must be positive, got {number!r}", field=path)
    return number


def parse_model(raw: Any, path: str) -> ReturnModel:
    section = _object(raw, path)
    family = section.get('family', 'exponential')
    if family not in MODEL_FAMILIES:
        raise ConfigError(f"unknown family '{family}' (expected one of {sorted(MODEL_FAMILIES)})",
                          field=f'{path}.family')
    _reject_unknown(section, MODEL_KEYS[family], path)
    params = {k: _number(v, f'{path}.{k}') for k, v in section.items() if k != 'family'}
    return build_return_model(family, **params)


def parse_game(raw: Any, path: str = 'game') -> GameConfig:
    section = _object(raw, path)
    _reject_unknown(section, GAME_KEYS, path)
    if 'players' not in section:
        raise ConfigError("missing required key 'players'", field=f'{path}.players')
    players_raw = section['players']
    if not isinstance(players_raw, list) or not players_raw:
        raise ConfigError("expected a non-empty list of players", field=f'{path}.players')

    players: List[PlayerParams] = []
    for k, entry in enumerate(players_raw):
        where = f'{path}.players[{k}]'
        player = _object(entry, where)
        _reject_unknown(player, PLAYER_KEYS, where)
        for key in sorted(PLAYER_KEYS):
            if key not in player:
                raise ConfigError(f"missing required key '{key}'", field=f'{where}.{key}')
        players.append(PlayerParams(mu_s=_positive(player['mu_s'], f'{where}.mu_s'),
                                    mu_r=_positive(player['mu_r'], f'{where}.mu_r')))

    r_s = _positive(section.get('r_s', DEFAULT_R_S), f'{path}.r_s')
    model = parse_model(section.get('model', {'family': 'exponential'}), f'{path}.model')
    try:
        return GameConfig.create(players, r_s=r_s, return_model=model)
    except StructuralError as e:
        raise ConfigError(str(e), field=path)


def parse_solver(raw: Any, base: SolverSettings, path: str = 'solver') -> SolverSettings:
    section = _object(raw, path)
    _reject_unknown(section, set(SOLVER_TYPES), path)
    overrides = {}
    for key, value in section.items():
        kind = SOLVER_TYPES[key]
        where = f'{path}.{key}'
        if kind is float:
            overrides[key] = None if value is None and key == 'relaxation' else _number(value, where)
        elif kind is int:
            overrides[key] = _integer(value, where)
        elif not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", field=where)
        else:
            overrides[key] = value.lower()
    return base.merged(overrides)


def parse_sweep(raw: Any, path: str = 'sweep') -> SweepSpec:
    section = _object(raw, path)
    _reject_unknown(section, SWEEP_KEYS, path)
    kwargs: Dict[str, Any] = {}
    for key in ('n_players', 'trials_per_rho', 'seed'):
        if key in section:
            kwargs[key] = _integer(section[key], f'{path}.{key}')
    for key in ('mean_mu_s', 'mean_mu_r', 'r_s'):
        if key in section:
            kwargs[key] = _positive(section[key], f'{path}.{key}')
    if 'rho_grid' in section:
        grid = section['rho_grid']
        if not isinstance(grid, list):
            raise ConfigError("expected a list of numbers", field=f'{path}.rho_grid')
        kwargs['rho_grid'] = tuple(_number(v, f'{path}.rho_grid[{k}]') for k, v in enumerate(grid))
    if 'model' in section:
        model = parse_model(section['model'], f'{path}.model')
        kwargs['model_family'] = model.family
        kwargs['model_params'] = model.parameters()
    return SweepSpec(**kwargs)


def parse_run_config(document: Any, base: Optional[SolverSettings] = None,
                     source: str = '<memory>') -> RunConfig:
    root = _object(document, '')
    _reject_unknown(root, TOP_LEVEL_KEYS, '')
    if not TOP_LEVEL_KEYS & set(root):
        raise ConfigError("expected at least one of 'game', 'solver', 'sweep'")
    settings = base or SolverSettings.from_env()
    return RunConfig(
        game=parse_game(root['game']) if 'game' in root else None,
        solver=parse_solver(root['solver'], settings) if 'solver' in root else settings,
        sweep=parse_sweep(root['sweep']) if 'sweep' in root else None,
        source=source,
    )


def load_run_config(path: str, base: Optional[SolverSettings] = None) -> RunConfig:
    """Read and validate a run config file. I/O failures propagate as OSError."""
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e.msg}", line=e.lineno, column=e.colno)
    config = parse_run_config(document, base=base, source=path)
    logger.debug(f"Loaded run config from {path}")
    return config
