#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Synthetic Data Generators

Seeded stand-ins for real group images and videos. Individual features are
drawn from class-dependent Gaussian clusters whose means sit on an
equilateral triangle in the first two feature dimensions, so any two class
means are exactly ``separation`` apart. Faces of one group are placed around
an anchor point and anchors are about 1000 px apart, so location clustering
recovers the groups.
"""

import logging
from collections import OrderedDict
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DomainError
from src.grouping.grouping import FaceBox, GroupedFeature, cluster_faces, group_boxes, stack_group
from src.numeric_core.tensor import Tensor
from src.synthdata.dataset_io import FaceRecord, GroupRegion, SceneRecord
from src.synthdata.labels import FACE_VALENCE, GROUP_CLASSES, class_index, group_label_from_faces
from src.tnvpf.temporal import FrameSequence

logger = logging.getLogger(__name__)

ANCHOR_SPACING = 1000.0
FACE_SPREAD = 120.0
DEFAULT_FLIP_PROBABILITY = 0.1


def class_means(M: int, separation: float) -> np.ndarray:
    """
    Cluster centers for the three group classes

    Returns:
        C×M array with pairwise distances equal to ``separation``
    """
    if M < 2:
        raise DomainError(f"feature dimension must be at least 2, got {M}")
    if separation < 0:
        raise DomainError(f"separation must be non-negative, got {separation}")
    radius = separation / np.sqrt(3.0)
    means = np.zeros((len(GROUP_CLASSES), M))
    for c in range(len(GROUP_CLASSES)):
        angle = np.pi / 2 + 2 * np.pi * c / len(GROUP_CLASSES)
        means[c, 0] = radius * np.cos(angle)
        means[c, 1] = radius * np.sin(angle)
    return means


def _face_categories(label: str) -> List[str]:
    return [face for face, valence in FACE_VALENCE.items() if valence == label]


def gen_group_faces(label: str, N: int, M: int, separation: float, rng: np.random.Generator,
                    anchor: Tuple[float, float] = (0.0, 0.0)) -> List[FaceBox]:
    """
    Faces of one group around ``anchor``

    Feature and box draws do not depend on the class, so with zero separation
    every class yields identical features for the same generator state.
    """
    mean = class_means(M, separation)[class_index(label)]
    if N < 1:
        raise DomainError(f"a group needs at least one face, got N={N}")
    features = mean + rng.standard_normal((N, M))
    offsets = rng.uniform(-FACE_SPREAD, FACE_SPREAD, size=(N, 2))
    sizes = rng.uniform(100.0, 200.0, size=(N, 2))
    categories = _face_categories(label)
    picks = rng.integers(0, 1 << 30, size=N)
    return [
        FaceBox(
            center=(float(anchor[0] + offsets[i, 0]), float(anchor[1] + offsets[i, 1])),
            size=(float(sizes[i, 0]), float(sizes[i, 1])),
            feature=Tensor(features[i]),
            face_label=categories[picks[i] % len(categories)],
        )
        for i in range(N)
    ]


def gen_group_sample(label: str, N: int, M: int, separation: float, seed: int,
                     N_max: Optional[int] = None) -> Tuple[GroupedFeature, str]:
    """
    One labelled group

    Args:
        label: Group class
        N: Number of faces
        M: Feature dimension
        separation: Distance between class means
        seed: Generator seed
        N_max: Column count of the stacked matrix (defaults to N)

    Returns:
        (grouped feature, label)
    """
    N_max = N if N_max is None else N_max
    if N > N_max:
        raise DomainError(f"N={N} exceeds N_max={N_max}")
    faces = gen_group_faces(label, N, M, separation, np.random.default_rng(seed))
    return stack_group(faces, N_max), label


def gen_group_dataset(count: int, N: int, M: int, separation: float, seed: int,
                      N_max: Optional[int] = None) -> List[Tuple[GroupedFeature, str]]:
    """
    Class-balanced labelled groups; labels cycle through the class order
    """
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=count)
    return [
        gen_group_sample(GROUP_CLASSES[i % len(GROUP_CLASSES)], N, M, separation, int(seeds[i]), N_max)
        for i in range(count)
    ]


def frame_labels(video_label: str, T: int, flip_probability: float, rng: np.random.Generator) -> List[str]:
    """
    Per-frame labels following the video label, each independently replaced
    by a uniformly chosen other class with ``flip_probability``
    """
    if not 0.0 <= flip_probability <= 1.0:
        raise DomainError(f"flip probability must lie in [0, 1], got {flip_probability}")
    base = class_index(video_label)
    flips = rng.random(T) < flip_probability
    others = rng.integers(1, len(GROUP_CLASSES), size=T)
    return [GROUP_CLASSES[(base + int(others[t])) % len(GROUP_CLASSES)] if flips[t] else video_label
            for t in range(T)]


def _to_records(faces: List[FaceBox]) -> List[FaceRecord]:
    return [
        FaceRecord(center=face.center, size=face.size, feature=[float(v) for v in face.feature.data],
                   face_label=face.face_label)
        for face in faces
    ]


def gen_scene(frame_label: str, groups_per_frame: int, faces_per_group: int, M: int, separation: float,
              rng: np.random.Generator, frame_id: str = "frame", video_id: str = "",
              video_label: Optional[str] = None) -> SceneRecord:
    """
    One frame whose groups all express the frame's class
    """
    if groups_per_frame < 1:
        raise DomainError(f"a frame needs at least one group, got {groups_per_frame}")
    faces: List[FaceBox] = []
    regions = []
    for g in range(groups_per_frame):
        anchor = (ANCHOR_SPACING * (g % 4) + 500.0, ANCHOR_SPACING * (g // 4) + 500.0)
        members = gen_group_faces(frame_label, faces_per_group, M, separation, rng, anchor)
        regions.append(GroupRegion(group_id=g, members=list(range(len(faces), len(faces) + len(members))),
                                   label=group_label_from_faces([m.face_label for m in members])))
        faces.extend(members)
    return SceneRecord(frame_id=frame_id, faces=_to_records(faces), groups=regions, frame_label=frame_label,
                       video_id=video_id, video_label=video_label or frame_label)


def gen_video(label: str, T: int, groups_per_frame: int, seed: int, flip_probability: float = DEFAULT_FLIP_PROBABILITY,
              faces_per_group: int = 4, M: int = 8, separation: float = 3.0,
              video_id: Optional[str] = None) -> List[SceneRecord]:
    """
    One video as T scene records

    Args:
        label: Video class
        T: Number of frames
        groups_per_frame: Groups in each frame
        seed: Generator seed
        flip_probability: Chance that a frame shows another class
        faces_per_group: Faces in each group
        M: Feature dimension
        separation: Distance between class means
        video_id: Identifier (defaults to one derived from the seed)

    Returns:
        The frames in order
    """
    if T < 1:
        raise DomainError(f"a video needs at least one frame, got T={T}")
    rng = np.random.default_rng(seed)
    video_id = video_id or f"video-{seed}"
    labels = frame_labels(label, T, flip_probability, rng)
    return [
        gen_scene(labels[t], groups_per_frame, faces_per_group, M, separation, rng,
                  frame_id=f"{video_id}/{t}", video_id=video_id, video_label=label)
        for t in range(T)
    ]


def gen_video_dataset(count: int, T: int, groups_per_frame: int, seed: int,
                      flip_probability: float = DEFAULT_FLIP_PROBABILITY, faces_per_group: int = 4,
                      M: int = 8, separation: float = 3.0) -> List[SceneRecord]:
    """Class-balanced videos, flattened into their frame records"""
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=count)
    records: List[SceneRecord] = []
    for i in range(count):
        records.extend(gen_video(GROUP_CLASSES[i % len(GROUP_CLASSES)], T, groups_per_frame, int(seeds[i]),
                                 flip_probability, faces_per_group, M, separation, video_id=f"video-{i:05d}"))
    return records


def gen_group_scene_dataset(count: int, faces_per_group: int, M: int, separation: float,
                            seed: int) -> List[SceneRecord]:
    """
    Class-balanced single-group scenes, one record per group, for training
    and scoring the group-level models
    """
    rng = np.random.default_rng(seed)
    return [
        gen_scene(GROUP_CLASSES[i % len(GROUP_CLASSES)], 1, faces_per_group, M, separation, rng,
                  frame_id=f"group-{i:05d}", video_id=f"group-{i:05d}")
        for i in range(count)
    ]


def split_by_video(records: Sequence[SceneRecord], train_fraction: float = 0.9,
                   seed: int = 0) -> Tuple[List[SceneRecord], List[SceneRecord]]:
    """
    Split records so that all frames of a video land on the same side

    Returns:
        (train records, test records), each in the original order
    """
    video_ids = sorted({record.video_id for record in records})
    order = np.random.default_rng(seed).permutation(len(video_ids))
    n_train = int(round(train_fraction * len(video_ids)))
    train_ids = {video_ids[i] for i in order[:n_train]}
    train = [record for record in records if record.video_id in train_ids]
    test = [record for record in records if record.video_id not in train_ids]
    return train, test


def _face_boxes(record: SceneRecord) -> List[FaceBox]:
    return [FaceBox(center=face.center, size=face.size, feature=Tensor(np.array(face.feature)),
                    face_label=face.face_label) for face in record.faces]


def scene_groups(record: SceneRecord, N_max: int, cluster_k: Optional[int] = None,
                 seed: int = 0) -> List[Tuple[GroupedFeature, str]]:
    """
    Grouped features of one frame with their labels

    Args:
        record: The frame
        N_max: Column count of each group matrix
        cluster_k: Regroup faces by location clustering with this K instead
                   of using the stored regions; cluster labels come from the
                   member faces
        seed: Clustering seed

    Returns:
        (grouped feature, label) pairs
    """
    boxes = _face_boxes(record)
    if cluster_k is None:
        return [
            (stack_group([boxes[i] for i in region.members], N_max, region.group_id), region.label)
            for region in record.groups
        ]
    members = group_boxes(boxes, cluster_faces(boxes, cluster_k, seed))
    return [
        (stack_group(group, N_max, g), group_label_from_faces([box.face_label for box in group]))
        for g, group in enumerate(members)
    ]


def records_to_groups(records: Sequence[SceneRecord], N_max: int, cluster_k: Optional[int] = None,
                      seed: int = 0) -> List[Tuple[GroupedFeature, str]]:
    """All labelled groups of all frames"""
    return [pair for record in records for pair in scene_groups(record, N_max, cluster_k, seed)]


def records_to_sequences(records: Sequence[SceneRecord], N_max: int) -> List[FrameSequence]:
    """
    Gather frames by video (in order of first appearance) into sequences
    """
    videos: "OrderedDict[str, List[SceneRecord]]" = OrderedDict()
    for record in records:
        videos.setdefault(record.video_id, []).append(record)
    sequences = []
    for video_id, frames in videos.items():
        sequences.append(FrameSequence(
            frames=[[group for group, _ in scene_groups(frame, N_max)] for frame in frames],
            labels=[frame.frame_label for frame in frames],
            video_label=frames[0].video_label,
            video_id=video_id,
        ))
    return sequences
