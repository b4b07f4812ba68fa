#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Face Grouping

This module clusters detected face boxes into groups by location with seeded
k-means++ and Lloyd iterations, and stacks the members' features into the
fixed-width matrix consumed by the fusion flow.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DomainError, ShapeError
from src.numeric_core.tensor import Tensor, as_tensor, concat, reshape

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_N_MAX = 8
MAX_ITERATIONS = 100


@dataclass
class FaceBox:
    """
    A detected face: center and size in pixels plus its individual feature
    """

    center: Tuple[float, float]
    size: Tuple[float, float]
    feature: Tensor
    face_label: Optional[str] = None

    def __post_init__(self):
        self.feature = as_tensor(self.feature)
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise DomainError(f"face box size must be positive, got {self.size}")
        if self.feature.ndim != 1:
            raise ShapeError(f"face feature must be a vector, got shape {self.feature.shape}")

    @property
    def area(self) -> float:
        return float(self.size[0] * self.size[1])


@dataclass
class GroupedFeature:
    """
    Stacked group matrix S (M×N_max) with its valid-column mask
    """

    S: Tensor
    mask: np.ndarray
    group_id: int = 0
    members: List[int] = field(default_factory=list)

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())


@dataclass
class KMeansResult:
    assignment: np.ndarray
    centroids: np.ndarray
    sse_history: List[float]
    iterations: int


def _sse(points: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    return float(((points - centroids[assignment]) ** 2).sum())


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = [points[rng.integers(len(points))]]
    for _ in range(1, k):
        d2 = ((points[:, None, :] - np.array(centroids)[None]) ** 2).sum(axis=2).min(axis=1)
        total = d2.sum()
        if total <= 0:
            # fewer distinct points than clusters
            index = rng.integers(len(points))
        else:
            index = rng.choice(len(points), p=d2 / total)
        centroids.append(points[index])
    return np.array(centroids, dtype=float)


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iterations: int = MAX_ITERATIONS) -> KMeansResult:
    """
    Lloyd's algorithm with seeded k-means++ initialization

    Points are processed in a canonical (sorted) order and clusters are
    numbered by first appearance in that order, so permuting the input
    permutes the assignment identically.

    Args:
        points: n×d array
        k: Requested number of clusters; clamped to n
        seed: Seed for the initialization
        max_iterations: Iteration cap

    Returns:
        KMeansResult with assignment, centroids, SSE per iteration and
        iteration count; empty clusters are dropped
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise ShapeError(f"kmeans needs a non-empty n×d array, got shape {points.shape}")
    if k < 1:
        raise DomainError(f"K must be at least 1, got {k}")
    if k > len(points):
        logger.warning("K=%d exceeds the number of points (%d); clamping", k, len(points))
        k = len(points)

    order = np.lexsort(points.T[::-1])
    canonical = points[order]
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(canonical, k, rng)

    history: List[float] = []
    assignment = np.full(len(canonical), -1)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        distances = ((canonical[:, None, :] - centroids[None]) ** 2).sum(axis=2)
        new_assignment = distances.argmin(axis=1)
        stable = np.array_equal(new_assignment, assignment)
        assignment = new_assignment
        for j in range(len(centroids)):
            members = canonical[assignment == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        history.append(_sse(canonical, centroids, assignment))
        if stable:
            break
    logger.debug("kmeans converged after %d iterations, SSE %.4f", iterations, history[-1])

    # Drop empty clusters and number the rest by first appearance in canonical order
    relabel = {}
    for label in assignment:
        relabel.setdefault(int(label), len(relabel))
    used = sorted(relabel, key=relabel.get)
    if len(used) < k:
        logger.warning("kmeans: dropped %d empty cluster(s) of %d", k - len(used), k)
    result = np.empty(len(points), dtype=int)
    result[order] = [relabel[int(label)] for label in assignment]
    return KMeansResult(
        assignment=result,
        centroids=centroids[used],
        sse_history=history,
        iterations=iterations,
    )


def cluster_faces(boxes: Sequence[FaceBox], K: int = DEFAULT_K, seed: int = 0) -> List[int]:
    """
    Cluster face boxes by their centers

    Args:
        boxes: Non-empty list of face boxes
        K: Number of clusters (clamped to the number of boxes)
        seed: Initialization seed

    Returns:
        Cluster index per box
    """
    if not boxes:
        raise DomainError("cluster_faces needs at least one box")
    centers = np.array([box.center for box in boxes], dtype=float)
    return kmeans(centers, K, seed).assignment.tolist()


def group_boxes(boxes: Sequence[FaceBox], assignment: Sequence[int]) -> List[List[FaceBox]]:
    """
    Split boxes into member lists, one per cluster index
    """
    if len(boxes) != len(assignment):
        raise ShapeError(f"{len(boxes)} boxes but {len(assignment)} assignments")
    groups: List[List[FaceBox]] = [[] for _ in range(max(assignment) + 1 if assignment else 0)]
    for box, label in zip(boxes, assignment):
        groups[label].append(box)
    return [group for group in groups if group]


def stack_group(members: Sequence[FaceBox], N_max: int = DEFAULT_N_MAX, group_id: int = 0) -> GroupedFeature:
    """
    Stack member features as columns of S

    When there are more than N_max members the largest boxes by area are kept.
    Columns are ordered by center x, then y, then feature values; unused
    columns are zero and masked out.

    Args:
        members: At least one face box
        N_max: Fixed column count
        group_id: Identifier carried into the result

    Returns:
        The grouped feature
    """
    if not members:
        raise DomainError("a group needs at least one member")
    if N_max < 1:
        raise DomainError(f"N_max must be at least 1, got {N_max}")
    m = members[0].feature.size
    for box in members:
        if box.feature.size != m:
            raise ShapeError(f"inconsistent feature lengths in group: {m} and {box.feature.size}")

    def spatial_key(index: int):
        box = members[index]
        return (box.center[0], box.center[1], tuple(box.feature.data))

    indices = list(range(len(members)))
    if len(indices) > N_max:
        ranked = sorted(indices, key=lambda i: (-members[i].area,) + spatial_key(i))
        indices = ranked[:N_max]
        logger.debug("group %d: kept %d of %d faces", group_id, N_max, len(members))
    indices.sort(key=spatial_key)

    columns = [reshape(members[i].feature, (m, 1)) for i in indices]
    if len(columns) < N_max:
        columns.append(Tensor(np.zeros((m, N_max - len(columns)))))
    mask = np.zeros(N_max, dtype=bool)
    mask[:len(indices)] = True
    return GroupedFeature(S=concat(columns, axis=1), mask=mask, group_id=group_id, members=indices)
