# =============================================================================
# GAZE MODULE - Mapper Files
# File: modules/gaze/mapper_io.py
# =============================================================================

import json
from pathlib import Path

import logging

from ..core.errors import DatasetFormatError
from .net_mapper import NetMapper
from .poly_mapper import PolyMapper

logger = logging.getLogger(__name__)

MAPPER_SCHEMA = "glintgaze.mapper"
MAPPER_SCHEMA_VERSION = 1

_KINDS = {PolyMapper.kind: PolyMapper, NetMapper.kind: NetMapper}


def mapper_to_dict(mapper, subject_id=None, config_hash=None):
    return {
        "schema": MAPPER_SCHEMA,
        "schema_version": MAPPER_SCHEMA_VERSION,
        "kind": mapper.kind,
        "subject_id": subject_id,
        "config_hash": config_hash,
        "mapper": mapper.to_dict(),
    }


def mapper_from_dict(data):
    if data.get("schema") != MAPPER_SCHEMA or data.get("schema_version") != MAPPER_SCHEMA_VERSION:
        raise DatasetFormatError(f"Not a version {MAPPER_SCHEMA_VERSION} mapper file")
    kind = data.get("kind")
    if kind not in _KINDS:
        raise DatasetFormatError(f"Unknown mapper kind {kind!r}")
    try:
        return _KINDS[kind].from_dict(data["mapper"])
    except (KeyError, TypeError, ValueError, RuntimeError) as e:
        raise DatasetFormatError(f"Malformed {kind} mapper: {e}") from e


def save_mapper(path, mapper, subject_id=None, config_hash=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(mapper_to_dict(mapper, subject_id, config_hash), f)
    logger.info(f"Mapper saved to {path}")


def load_mapper(path):
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetFormatError(f"Cannot read mapper {path}: {e}") from e
    return mapper_from_dict(data)
