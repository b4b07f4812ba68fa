#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Emotion Label Spaces

Face-level categories (eight, keyed by prototypical action units) and the
three group-level classes shared by groups, frames and videos.
"""

from collections import Counter
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

from src.errors import UnknownClassError

# Fixed class order; ties between classes resolve to the earlier entry
GROUP_CLASSES: Tuple[str, ...] = ("positive", "negative", "neutral")

FACE_CLASSES: Tuple[str, ...] = (
    "Happy",
    "Sad",
    "Fearful",
    "Angry",
    "Surprised",
    "Disgusted",
    "Awed",
    "Neutral",
)

AU_PATTERNS: Dict[str, FrozenSet[int]] = {
    "Happy": frozenset({12, 25}),
    "Sad": frozenset({4, 15}),
    "Fearful": frozenset({1, 4, 20, 25}),
    "Angry": frozenset({4, 7, 24}),
    "Surprised": frozenset({1, 2, 25, 26}),
    "Disgusted": frozenset({9, 10, 17}),
    "Awed": frozenset({1, 2, 5, 25}),
}

FACE_VALENCE: Dict[str, str] = {
    "Happy": "positive",
    "Surprised": "positive",
    "Awed": "positive",
    "Sad": "negative",
    "Fearful": "negative",
    "Angry": "negative",
    "Disgusted": "negative",
    "Neutral": "neutral",
}


def class_index(label: str) -> int:
    """
    Position of a group-level label in the fixed class order

    Raises:
        UnknownClassError: If the label is not a group-level class
    """
    try:
        return GROUP_CLASSES.index(label)
    except ValueError:
        raise UnknownClassError(f"unknown group class {label!r}; expected one of {GROUP_CLASSES}") from None


def class_indices(labels: Iterable[str]) -> List[int]:
    return [class_index(label) for label in labels]


def check_face_label(label: str) -> str:
    if label not in FACE_CLASSES:
        raise UnknownClassError(f"unknown face category {label!r}; expected one of {FACE_CLASSES}")
    return label


def au_to_emotion(aus: Iterable[int]) -> str:
    """
    Map a set of active action units to a face category

    The category whose full pattern is contained in the input wins; the
    largest matched pattern is preferred and equal sizes fall back to table
    order. No match gives Neutral.

    Args:
        aus: Active action unit ids

    Returns:
        One of the eight face categories
    """
    active = set(aus)
    best, best_size = "Neutral", 0
    for category, pattern in AU_PATTERNS.items():
        if pattern <= active and len(pattern) > best_size:
            best, best_size = category, len(pattern)
    return best


def face_valence(label: str) -> str:
    """Group-level class a face category counts towards"""
    return FACE_VALENCE[check_face_label(label)]


def group_label_from_faces(face_labels: Sequence[str]) -> str:
    """
    Majority valence of the member faces; ties and empty input give neutral
    """
    counts = Counter(face_valence(label) for label in face_labels)
    if not counts:
        return "neutral"
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return "neutral"
    return ranked[0][0]
