"""File formats: YAML environments and reports, binary Q-table containers.

Environment schema (YAML, ``schema: 1``)::

    schema: 1
    width: 5
    height: 4
    propositions: [A, B, C]
    cells:
      - {x: 1, y: 2, labels: [A]}
      - {x: 2, y: 1, labels: [A, B, C]}
    start: [0, 0]        # optional

Cells omitted from ``cells`` are unlabeled.  Q-tables are stored as a magic
header, a JSON metadata blob and a row-major float64 payload; round-trips
are bit exact.  A hex-float text export exists for diffing.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from .errors import IncompatibleTables, InvalidEnvironment
from .mdp import ACTIONS, LabeledMdp, build_mdp
from .penalty import PenaltyConfig
from .planner import ExtendedQ, SafetyExtendedQ
from .runtime import PathClass, TrajectoryReport

ENV_SCHEMA = 1
QTAB_MAGIC = b"TAQT"
QTAB_VERSION = 1


def load_env(path: str | Path) -> LabeledMdp:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidEnvironment(f"cannot read environment file: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidEnvironment("environment file must be a mapping")
    if doc.get("schema", ENV_SCHEMA) != ENV_SCHEMA:
        raise InvalidEnvironment(f"unsupported schema version {doc.get('schema')}")
    try:
        width = int(doc["width"])
        height = int(doc["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidEnvironment("width and height are required integers") from exc
    props = doc.get("propositions")
    labels = {}
    for entry in doc.get("cells", []) or []:
        try:
            cell = (int(entry["x"]), int(entry["y"]))
            labels[cell] = frozenset(entry["labels"])
        except (KeyError, TypeError) as exc:
            raise InvalidEnvironment(f"bad cell entry {entry!r}") from exc
    start = doc.get("start")
    if start is not None:
        start = (int(start[0]), int(start[1]))
    return build_mdp(width, height, labels, propositions=props, start=start)


def save_env(mdp: LabeledMdp, path: str | Path) -> None:
    doc = {
        "schema": ENV_SCHEMA,
        "width": mdp.width,
        "height": mdp.height,
        "propositions": list(mdp.propositions),
        "cells": [
            {"x": x, "y": y, "labels": sorted(lbl)}
            for (x, y), lbl in sorted(mdp.labels.items())
        ],
    }
    if mdp.start is not None:
        doc["start"] = list(mdp.start)
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def _config_doc(config: PenaltyConfig) -> dict:
    return {
        "c_p": config.c_p,
        "r_step": config.r_step.hex(),
        "r_goal": config.r_goal.hex(),
        "extra_term_tier": config.extra_term_tier,
    }


def _config_from_doc(doc: dict) -> PenaltyConfig:
    return PenaltyConfig(
        c_p=int(doc["c_p"]),
        r_step=float.fromhex(doc["r_step"]),
        r_goal=float.fromhex(doc["r_goal"]),
        extra_term_tier=bool(doc.get("extra_term_tier", False)),
    )


def save_qtable(table: ExtendedQ, path: str | Path, task: dict | None = None) -> None:
    """Versioned binary container; the payload is the raw float64 table.

    ``task`` may carry extra descriptor fields (formula text, semantics) that
    commands use to rebuild a task spec from the file alone.
    """
    meta = {
        "shape": list(table.values.shape),
        "grid": list(table.grid),
        "n_regions": table.n_regions,
        "n_actions": table.n_actions,
        "actions": list(ACTIONS),
        "descriptor": table.descriptor,
        "config": _config_doc(table.config),
        "fingerprint": table.fingerprint,
        "converged": table.converged,
        "residual": table.residual,
        "sweeps": table.sweeps,
        "provenance": table.provenance,
        "task": task,
    }
    blob = json.dumps(meta, separators=(",", ":")).encode()
    payload = np.ascontiguousarray(table.values, dtype=np.float64).tobytes()
    with open(path, "wb") as fh:
        fh.write(QTAB_MAGIC)
        fh.write(struct.pack("<II", QTAB_VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload)


def read_qtable_meta(path: str | Path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:4] != QTAB_MAGIC:
        raise IncompatibleTables(f"{path}: not a Q-table container")
    _, blob_len = struct.unpack("<II", raw[4:12])
    return json.loads(raw[12 : 12 + blob_len].decode())


def load_qtable(path: str | Path, mdp: LabeledMdp | None = None) -> ExtendedQ:
    """Load a container; with ``mdp`` given, refuse tables from other layouts."""
    raw = Path(path).read_bytes()
    if raw[:4] != QTAB_MAGIC:
        raise IncompatibleTables(f"{path}: not a Q-table container")
    version, blob_len = struct.unpack("<II", raw[4:12])
    if version != QTAB_VERSION:
        raise IncompatibleTables(f"{path}: unsupported container version {version}")
    meta = json.loads(raw[12 : 12 + blob_len].decode())
    shape = tuple(meta["shape"])
    values = np.frombuffer(raw[12 + blob_len :], dtype=np.float64).reshape(shape).copy()
    table = ExtendedQ(
        values=values,
        config=_config_from_doc(meta["config"]),
        fingerprint=meta["fingerprint"],
        descriptor=meta["descriptor"],
        grid=tuple(meta.get("grid") or (0, 0)),
        spec=None,
        converged=bool(meta["converged"]),
        residual=float(meta["residual"]),
        sweeps=int(meta.get("sweeps", 0)),
        provenance=meta.get("provenance"),
    )
    if mdp is not None and table.fingerprint != mdp.fingerprint():
        raise IncompatibleTables(f"{path}: table was trained on a different environment")
    return table


def save_safety_qtable(table: SafetyExtendedQ, path: str | Path) -> None:
    """Container variant for the per-subset table stack."""
    meta = {
        "shape": list(table.values.shape),
        "grid": list(table.grid),
        "subsets": [sorted(s) for s in table.subsets],
        "descriptor": table.descriptor,
        "config": _config_doc(table.config),
        "fingerprint": table.fingerprint,
    }
    blob = json.dumps(meta, separators=(",", ":")).encode()
    payload = np.ascontiguousarray(table.values, dtype=np.float64).tobytes()
    with open(path, "wb") as fh:
        fh.write(QTAB_MAGIC)
        fh.write(struct.pack("<II", QTAB_VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_safety_qtable(path: str | Path, base, mdp: LabeledMdp | None = None) -> SafetyExtendedQ:
    raw = Path(path).read_bytes()
    if raw[:4] != QTAB_MAGIC:
        raise IncompatibleTables(f"{path}: not a Q-table container")
    version, blob_len = struct.unpack("<II", raw[4:12])
    if version != QTAB_VERSION:
        raise IncompatibleTables(f"{path}: unsupported container version {version}")
    meta = json.loads(raw[12 : 12 + blob_len].decode())
    if "subsets" not in meta:
        raise IncompatibleTables(f"{path}: not a safety table stack")
    shape = tuple(meta["shape"])
    values = np.frombuffer(raw[12 + blob_len :], dtype=np.float64).reshape(shape).copy()
    table = SafetyExtendedQ(
        values=values,
        subsets=[frozenset(s) for s in meta["subsets"]],
        base=base,
        config=_config_from_doc(meta["config"]),
        fingerprint=meta["fingerprint"],
        descriptor=meta["descriptor"],
        grid=tuple(meta.get("grid") or (0, 0)),
    )
    if mdp is not None and table.fingerprint != mdp.fingerprint():
        raise IncompatibleTables(f"{path}: table was trained on a different environment")
    return table


def export_qtable_text(table: ExtendedQ) -> str:
    """Lossless, diffable text form: metadata header plus hex floats."""
    lines = [
        f"descriptor {table.descriptor}",
        f"fingerprint {table.fingerprint}",
        f"config {json.dumps(_config_doc(table.config), sort_keys=True)}",
        f"shape {' '.join(map(str, table.values.shape))}",
    ]
    flat = table.values.reshape(-1)
    lines.extend(v.hex() for v in flat)
    return "\n".join(lines) + "\n"


def import_qtable_text(text: str) -> np.ndarray:
    lines = text.strip().splitlines()
    shape = tuple(int(t) for t in lines[3].split()[1:])
    values = np.array([float.fromhex(v) for v in lines[4:]])
    return values.reshape(shape)


def report_to_doc(report: TrajectoryReport, mdp: LabeledMdp) -> dict:
    steps = report.execution.steps
    doc = {
        "schema": ENV_SCHEMA,
        "start": list(steps[0][0]),
        "steps": [
            {
                "cell": list(cell),
                "emitted": sorted(emitted),
                "action": ACTIONS[report.actions[i - 1]] if i > 0 else None,
            }
            for i, (cell, emitted) in enumerate(steps)
        ],
        "terminated": report.terminated,
        "terminal_region": report.execution.terminal_region,
        "chatter": report.chatter,
        "truncated": report.truncated,
        "path_class": report.path_class.value if report.path_class else None,
        "total_reward": report.total_reward,
    }
    if report.stats is not None:
        doc["stats"] = asdict(report.stats)
    return doc


def save_report(report: TrajectoryReport, mdp: LabeledMdp, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(report_to_doc(report, mdp), sort_keys=False))


def load_report(path: str | Path, mdp: LabeledMdp) -> TrajectoryReport:
    from .mdp import Execution, project, project_nonempty

    doc = yaml.safe_load(Path(path).read_text())
    steps = [
        (tuple(entry["cell"]), frozenset(entry["emitted"])) for entry in doc["steps"]
    ]
    actions = [
        ACTIONS.index(entry["action"]) for entry in doc["steps"] if entry["action"]
    ]
    execution = Execution(
        steps=steps,
        terminated=doc["terminated"],
        terminal_region=doc["terminal_region"],
    )
    return TrajectoryReport(
        execution=execution,
        actions=actions,
        projection=project(execution),
        nonempty_projection=project_nonempty(execution),
        chatter=doc.get("chatter", False),
        truncated=doc.get("truncated", False),
        path_class=PathClass(doc["path_class"]) if doc.get("path_class") else None,
        total_reward=doc.get("total_reward"),
    )
