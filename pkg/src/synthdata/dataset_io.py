#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Dataset Files

Scene records are stored one JSON object per line. A YAML manifest next to
the dataset records the generator settings and seed so the file can be
regenerated exactly.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

from src.errors import DatasetFormatError, DomainError, UnknownClassError
from src.synthdata.labels import check_face_label, class_index

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass
class FaceRecord:
    center: Tuple[float, float]
    size: Tuple[float, float]
    feature: List[float]
    face_label: Optional[str] = None


@dataclass
class GroupRegion:
    group_id: int
    members: List[int]
    label: str


@dataclass
class SceneRecord:
    """
    One frame: its faces, the group regions partitioning them and the labels
    of the frame and its video
    """

    frame_id: str
    faces: List[FaceRecord] = field(default_factory=list)
    groups: List[GroupRegion] = field(default_factory=list)
    frame_label: str = "neutral"
    video_id: str = ""
    video_label: str = "neutral"

    def validate(self) -> None:
        """
        Raises:
            DomainError: If a face is in no group or in several
            UnknownClassError: If a label is outside its label space
        """
        seen = [index for group in self.groups for index in group.members]
        if sorted(seen) != list(range(len(self.faces))):
            raise DomainError(f"frame {self.frame_id}: every face must belong to exactly one group")
        for face in self.faces:
            if face.face_label is not None:
                check_face_label(face.face_label)
        for group in self.groups:
            class_index(group.label)
        class_index(self.frame_label)
        class_index(self.video_label)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for face in data["faces"]:
            face["center"] = list(face["center"])
            face["size"] = list(face["size"])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SceneRecord":
        record = cls(
            frame_id=str(data["frame_id"]),
            faces=[
                FaceRecord(
                    center=tuple(float(v) for v in face["center"]),
                    size=tuple(float(v) for v in face["size"]),
                    feature=[float(v) for v in face["feature"]],
                    face_label=face.get("face_label"),
                )
                for face in data["faces"]
            ],
            groups=[
                GroupRegion(group_id=int(g["group_id"]), members=[int(m) for m in g["members"]], label=g["label"])
                for g in data["groups"]
            ],
            frame_label=data["frame_label"],
            video_id=str(data["video_id"]),
            video_label=data["video_label"],
        )
        record.validate()
        return record


def write_dataset(path: str, records: List[SceneRecord]) -> None:
    """
    Write records as JSON lines

    Args:
        path: Output file
        records: Records to write
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(record.to_dict(), sort_keys=True))
            f.write("\n")
    logger.info("Wrote %d records to %s", len(records), path)


def read_dataset(path: str) -> List[SceneRecord]:
    """
    Read a JSON-lines dataset

    Args:
        path: Dataset file

    Returns:
        The records in file order

    Raises:
        DatasetFormatError: On the first malformed line, naming it
    """
    records = []
    with open(path, "r") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(SceneRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"invalid JSON: {e.msg}", number) from None
            except (KeyError, TypeError, ValueError, DomainError, UnknownClassError) as e:
                raise DatasetFormatError(f"invalid record: {e}", number) from None
    logger.debug("Read %d records from %s", len(records), path)
    return records


def manifest_path(dataset_path: str) -> str:
    return f"{dataset_path}.manifest.yaml"


def write_manifest(dataset_path: str, generator: Dict[str, Any], seed: int, counts: Dict[str, int]) -> str:
    """
    Record how a dataset was generated

    Args:
        dataset_path: The dataset file the manifest describes
        generator: Generator settings
        seed: Generator seed
        counts: Record counts per split or kind

    Returns:
        Path of the manifest
    """
    path = manifest_path(dataset_path)
    manifest = {
        "version": MANIFEST_VERSION,
        "dataset": os.path.basename(dataset_path),
        "seed": seed,
        "generator": generator,
        "counts": counts,
    }
    with open(path, "w") as f:
        yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=False)
    return path


def read_manifest(dataset_path: str) -> Dict[str, Any]:
    with open(manifest_path(dataset_path), "r") as f:
        return yaml.safe_load(f)
