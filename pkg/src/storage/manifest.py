"""
Run manifests

Each CLI run appends one JSON line with the command, its full argv, every
parsed flag and the SHA-256 digests of the files it read and wrote. That is
enough to re-run the command and check the outputs are bit-identical.
"""

import hashlib
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


def file_digest(path) -> Optional[str]:
    path = Path(path)
    if not path.is_file():
        return None
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def digests(paths: Iterable) -> Dict[str, Optional[str]]:
    return {str(p): file_digest(p) for p in paths if p}


def build_record(command: str, argv: List[str], flags: dict, inputs: Iterable, outputs: Iterable) -> dict:
    return {
        "version": MANIFEST_VERSION,
        "command": command,
        "argv": list(argv),
        "flags": {k: v for k, v in flags.items() if k != "handler"},
        "inputs": digests(inputs),
        "outputs": digests(outputs),
        "python": sys.version.split()[0],
        "recorded_at": datetime.utcnow().isoformat(),
    }


def append_record(manifest_path, record: dict) -> None:
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, default=str, sort_keys=True) + "\n")
    logger.debug(f"Manifest record appended to {manifest_path}")


def read_records(manifest_path) -> List[dict]:
    records = []
    with open(manifest_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
