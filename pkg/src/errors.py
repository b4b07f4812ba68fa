#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Exceptions for NVPF

Library code raises these; the command line interface catches them at the
boundary and maps them to exit codes.
"""

from typing import Optional


class NvpfError(Exception):
    """Base class for all errors raised by this package"""


class ShapeError(NvpfError):
    """Operand shapes, channel counts or axes do not agree"""


class DomainError(NvpfError):
    """An argument lies outside the domain of an operation"""


class DivergenceError(NvpfError):
    """
    A computation produced non-finite values

    When raised from a training loop, ``step`` holds the offending step index.
    """

    def __init__(self, message: str, step: Optional[int] = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class ConfigError(NvpfError):
    """The configuration is missing keys or holds invalid values"""


class UnknownClassError(NvpfError):
    """A class label is not part of the label space"""


class DatasetFormatError(NvpfError):
    """A dataset file could not be parsed"""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CheckpointError(NvpfError):
    """A checkpoint could not be written or read"""


class ChecksumError(CheckpointError):
    """A tensor blob does not match the checksum in its manifest"""


class VersionError(CheckpointError):
    """A manifest was written by an incompatible format version"""
