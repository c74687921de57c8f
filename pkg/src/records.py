"""
RunRecord: the persisted, structured outcome of one lab command.

Records are written atomically (temporary file in the destination directory
followed by os.replace) so an interrupted run never leaves a partial file.
"""

import csv
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

LAB_VERSION = "1.0.0"
RUN_RECORD_FILE = "run_record.json"


def version_tag() -> str:
    """Lab version, with the commit from GIT_COMMIT appended when set"""
    commit = os.getenv("GIT_COMMIT", "").strip()
    return f"{LAB_VERSION}+{commit[:12]}" if commit else LAB_VERSION


def convert_numpy_types(obj):
    """Convert NumPy scalars and arrays to native Python types for JSON"""
    if isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    elif isinstance(obj, np.bool_):
        return bool(obj)
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, dict):
        return {str(key): convert_numpy_types(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_numpy_types(item) for item in obj]
    return obj


@dataclass
class Gate:
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "value": self.value, "threshold": self.threshold}


@dataclass
class RunRecord:
    """
    Config echo, scalar outputs, gates and findings of one command.

    Gate failures are not errors: they are stored as findings and turn the
    exit code of the command line into 2.
    """
    command: str
    config: Dict[str, Any] = dataclass_field(default_factory=dict)
    scalars: Dict[str, Any] = dataclass_field(default_factory=dict)
    artifacts: Dict[str, str] = dataclass_field(default_factory=dict)
    gates: List[Gate] = dataclass_field(default_factory=list)
    findings: List[str] = dataclass_field(default_factory=list)
    wall_time: float = 0.0
    version: str = dataclass_field(default_factory=version_tag)
    _started: float = dataclass_field(default_factory=time.perf_counter, repr=False)

    def add_gate(self, name: str, passed: bool, value: Optional[float] = None,
                 threshold: Optional[float] = None) -> bool:
        passed = bool(passed)
        self.gates.append(Gate(name, passed, value, threshold))
        if not passed:
            self.add_finding(f"gate {name} failed (value={value}, threshold={threshold})")
        return passed

    def add_finding(self, message: str):
        logger.warning(message)
        self.findings.append(message)

    def update_scalars(self, values: Dict[str, Any], prefix: str = ""):
        for key, value in values.items():
            self.scalars[f"{prefix}{key}"] = value

    @property
    def all_gates_passed(self) -> bool:
        return all(gate.passed for gate in self.gates)

    def finish(self):
        self.wall_time = time.perf_counter() - self._started

    def to_dict(self) -> Dict[str, Any]:
        return convert_numpy_types({
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "scalars": self.scalars,
            "artifacts": self.artifacts,
            "gates": [gate.to_dict() for gate in self.gates],
            "findings": self.findings,
            "all_gates_passed": self.all_gates_passed,
            "wall_time": self.wall_time,
        })


def _atomic_open(path: str, mode: str, **kwargs):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    return os.fdopen(fd, mode, **kwargs), tmp_path


def write_bytes_atomic(path: str, data: bytes):
    handle, tmp_path = _atomic_open(path, "wb")
    try:
        with handle:
            handle.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_json_atomic(path: str, payload: Dict[str, Any]):
    text = json.dumps(convert_numpy_types(payload), indent=2, sort_keys=True)
    write_bytes_atomic(path, (text + "\n").encode("utf-8"))


def write_csv_atomic(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    handle, tmp_path = _atomic_open(path, "w", newline="", encoding="utf-8")
    try:
        with handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in convert_numpy_types(list(row))])
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_run_record(record: RunRecord, output_dir: str) -> str:
    path = os.path.join(output_dir, RUN_RECORD_FILE)
    if not record.wall_time:
        record.finish()
    record.artifacts.setdefault("run_record", RUN_RECORD_FILE)
    write_json_atomic(path, record.to_dict())
    logger.info(f"RunRecord written to {path}")
    return path


def read_run_record(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
