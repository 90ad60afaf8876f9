import copy
import logging

import yaml

from utils.resource_utils import resource_path

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    'logging': {
        'directory': 'logs',
        'file': 'equidesign.log',
        'level': 'INFO',
        'max_bytes': 5 * 1024 * 1024,
        'backup_count': 5,
    },
    'solver': {
        'max_verify_calls': 10_000_000,
        'value_iteration_start': 8,
    },
    'oracle': {
        'max_states': 5,
        'max_players': 2,
        'max_actions': 2,
        'max_edges': 10,
        'max_budget': 2,
        'weight_low': -3,
        'weight_high': 3,
    },
    'selftest': {
        'seed': 2019,
        'punishment_games': 200,
        'lp_instances': 200,
        'queries': 100,
    },
    'output': {
        'indent': 2,
        'include_meta': True,
    },
}


def merge_config(defaults, overrides):
    """Recursively overlay `overrides` on a copy of `defaults`; unknown keys are kept."""
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path=None):
    """
    Load configuration from config.yaml and fill gaps from DEFAULT_CONFIG.

    Parameters:
    -----------
    path : str, optional
        Explicit file to read; defaults to config.yaml next to the entry script.

    Returns:
    --------
    dict
        The merged configuration. A missing or unreadable file falls back to the
        defaults with a warning.
    """
    config_path = path or resource_path('config.yaml', external=True)
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"top level of {config_path} is not a mapping")
    except (OSError, yaml.YAMLError, ValueError) as e:
        logger.warning(f"Error loading config, using defaults: {e}")
        loaded = {}
    config = merge_config(DEFAULT_CONFIG, loaded)
    config['path'] = str(config_path)
    return config
