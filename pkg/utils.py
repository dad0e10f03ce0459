import json
import logging
import os
import os.path as osp
from logging import StreamHandler

import numpy as np
import pandas as pd
import yaml
from munch import Munch

from Modules.exceptions import ConfigError

LOG_FORMAT = '%(levelname)s:%(asctime)s: %(message)s'
FLOAT_FORMAT = '.17g'
SECTIONS = ('grid', 'decoherence', 'discounted', 'bound', 'param_map', 'optimizer')


def recursive_munch(d):
    if isinstance(d, dict):
        return Munch((k, recursive_munch(v)) for k, v in d.items())
    elif isinstance(d, list):
        return [recursive_munch(v) for v in d]
    else:
        return d


def recursive_unmunch(d):
    if isinstance(d, dict):
        return {k: recursive_unmunch(v) for k, v in d.items()}
    elif isinstance(d, (list, tuple)):
        return [recursive_unmunch(v) for v in d]
    else:
        return d


def load_config(config_path):
    """Read a JSON or YAML run configuration into a Munch tree."""
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            if config_path.endswith(('.yaml', '.yml')):
                config = yaml.safe_load(f)
            else:
                config = json.load(f)
    except OSError as e:
        raise ConfigError('config', f"cannot read {config_path}: {e}") from e
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError('config', f"malformed configuration {config_path}: {e}") from e
    if not isinstance(config, dict):
        raise ConfigError('config', "top level must be a mapping")
    if 'model' not in config:
        raise ConfigError('model', "missing model section")
    config = recursive_munch(config)
    for key in ('model',) + SECTIONS:
        config_section(config, key)
    return config


def config_section(config, key):
    """Optional run-config section as a Munch; missing or null sections are empty."""
    section = config.get(key, None)
    if section is None:
        return Munch()
    if not isinstance(section, dict):
        raise ConfigError(key, f"expected a mapping, got {type(section).__name__}")
    return section


def parse_matrix(data, field):
    """Nested row-major lists -> ndarray.

    Complex matrices are written as {"complex": true, "data": [[[re, im], ...]]}.
    """
    try:
        if isinstance(data, dict):
            values = np.asarray(data['data'], dtype=float)
            if data.get('complex', False):
                if values.ndim != 3 or values.shape[-1] != 2:
                    raise ConfigError(field, "complex entries must be [re, im] pairs")
                M = values[..., 0] + 1j * values[..., 1]
            else:
                M = values
        else:
            M = np.asarray(data, dtype=float)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(field, f"cannot parse matrix ({e})") from e
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2:
        raise ConfigError(field, f"expected a matrix, got {M.ndim} dimensions")
    if not np.all(np.isfinite(M)):
        raise ConfigError(field, "non-finite entries")
    return M


def parse_matrix_list(data, field):
    if data is None:
        return []
    if not isinstance(data, (list, tuple)):
        raise ConfigError(field, f"expected a list of matrices, got {type(data).__name__}")
    return [parse_matrix(d, f'{field}[{i}]') for i, d in enumerate(data)]


def parse_float(value, field):
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(field, f"expected a number, got {value!r}") from e


def parse_float_list(values, field):
    if values is None:
        return []
    if not isinstance(values, (list, tuple)):
        values = [values]
    return [parse_float(v, f"{field}[{i}]") for i, v in enumerate(values)]


def matrix_to_list(M):
    M = np.asarray(M)
    if np.iscomplexobj(M):
        if np.abs(M.imag).max(initial=0.0) == 0.0:
            return M.real.tolist()
        return {'complex': True, 'data': np.stack([M.real, M.imag], axis=-1).tolist()}
    return M.tolist()


def to_jsonable(value):
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def format_float(value):
    text = format(value, FLOAT_FORMAT)
    # keep floats distinguishable from integers on reload
    return text if any(c in text for c in '.e') else text + '.0'


def dumps_json(value, indent=2, level=0):
    """JSON text with floats printed to 17 significant digits."""
    pad = ' ' * (indent * (level + 1))
    end = ' ' * (indent * level)
    if isinstance(value, dict):
        if not value:
            return '{}'
        items = [f'{pad}{json.dumps(str(k))}: {dumps_json(v, indent, level + 1)}' for k, v in value.items()]
        return '{\n' + ',\n'.join(items) + '\n' + end + '}'
    if isinstance(value, list):
        if not value:
            return '[]'
        return '[\n' + ',\n'.join(pad + dumps_json(v, indent, level + 1) for v in value) + '\n' + end + ']'
    if isinstance(value, float):
        return format_float(value)
    return json.dumps(value)


def write_json(path, payload):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_json(to_jsonable(payload)))
        f.write('\n')


def write_csv(path, columns):
    """Write ordered columns with 17 significant digits."""
    df = pd.DataFrame(columns)
    df.to_csv(path, index=False, float_format='%.17g', lineterminator='\n', encoding='utf-8')


def setup_logging(logger, log_dir=None, quiet=False):
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        if getattr(handler, "_qmem", False):
            logger.removeHandler(handler)
            handler.close()
    handler = StreamHandler()
    handler.setLevel(logging.WARNING if quiet else logging.INFO)
    handler._qmem = True
    logger.addHandler(handler)
    if log_dir is not None:
        if not osp.exists(log_dir): os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(osp.join(log_dir, 'run.log'), encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler._qmem = True
        logger.addHandler(file_handler)
    return logger


def log_print(message, logger):
    logger.info(message)
    print(message)
