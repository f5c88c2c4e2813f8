# =============================================================================
# SIMULATION MODULE - Dataset Serialization (JSON lines)
# File: modules/simulation/dataset_io.py
# =============================================================================
"""One JSON object per line. The first line is a header:

    {"kind": "header", "schema": "glintgaze.dataset", "schema_version": 1, ...}

followed by one ``{"kind": "frame", ...}`` record per frame. Lengths are
millimeters, kappa is in degrees, image positions are pixels.
"""

import json
from pathlib import Path
import logging

from ..core.errors import DatasetFormatError
from .eye_model import SubjectParams
from .protocol import DatasetFrame

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DATASET_SCHEMA = "glintgaze.dataset"
OBSERVATION_SCHEMA = "glintgaze.observations"


def subject_to_dict(subject: SubjectParams):
    return {
        "subject": subject.subject_id,
        "eyeball_center": subject.eyeball_center.tolist(),
        "kappa_deg": list(subject.kappa_deg),
        "cornea_radius": subject.cornea_radius,
        "eyeball_to_cornea": subject.eyeball_to_cornea,
        "pupil_mode": subject.pupil_mode,
    }


def write_jsonl(path, header, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        f.write(json.dumps(dict(header, kind="header"), sort_keys=True) + "\n")
        for record in records:
            f.write(json.dumps(dict(record, kind="frame"), sort_keys=True) + "\n")
    logger.info(f"Wrote {path}")


def read_jsonl(path, schema):
    path = Path(path)
    try:
        with open(path, 'r') as f:
            lines = [json.loads(line) for line in f if line.strip()]
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetFormatError(f"Cannot read {path}: {e}") from e

    if not lines or lines[0].get("kind") != "header":
        raise DatasetFormatError(f"{path}: missing header record")
    header = lines[0]
    if header.get("schema") != schema:
        raise DatasetFormatError(f"{path}: expected schema {schema}, found {header.get('schema')}")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise DatasetFormatError(f"{path}: unsupported schema version {header.get('schema_version')}")
    return header, [line for line in lines[1:] if line.get("kind") == "frame"]


def write_dataset(path, dataset, config_hash):
    header = {
        "schema": DATASET_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash,
        "subjects": [subject_to_dict(s) for s in dataset.subjects],
    }
    write_jsonl(path, header, (frame.to_dict() for frame in dataset.frames))


def read_dataset(path):
    header, records = read_jsonl(path, DATASET_SCHEMA)
    try:
        frames = [DatasetFrame.from_dict(r) for r in records]
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"{path}: malformed frame record: {e}") from e
    return header, frames
