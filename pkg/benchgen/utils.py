"""
Utility functions for benchgen.

This module provides callback guards plus the atomic file IO and canonical
JSON hashing used by the CLI and the replay store.
"""

import hashlib
import json
import os
import tempfile
from typing import Any, Callable, Optional

from .exceptions import FileOperationError


def safe_progress_callback(callback: Optional[Callable[[int], None]],
                           progress: int) -> None:
    """
    Safely call a progress callback function.

    Args:
        callback: Optional progress callback function that accepts progress percentage
        progress: Progress percentage (0-100)
    """
    if callback is not None:
        try:
            callback(progress)
        except Exception:
            # Callback errors must not break a run
            pass


def safe_status_callback(callback: Optional[Callable[[str], None]],
                         message: str) -> None:
    """
    Safely call a status callback function.

    Args:
        callback: Optional status callback function that accepts status messages
        message: Status message string
    """
    if callback is not None:
        try:
            callback(message)
        except Exception:
            pass


def ensure_directory_exists(directory_path: str) -> None:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        directory_path: Path to the directory

    Raises:
        FileOperationError: If directory cannot be created
    """
    if directory_path and not os.path.exists(directory_path):
        try:
            os.makedirs(directory_path, exist_ok=True)
        except OSError as e:
            raise FileOperationError(f"Cannot create directory {directory_path}: {e}") from e


def atomic_write_text(path: str, text: str) -> None:
    """
    Write UTF-8 text to ``path`` through a temporary file and rename.

    Args:
        path: Destination file path
        text: Content to write

    Raises:
        FileOperationError: If the file cannot be written
    """
    directory = os.path.dirname(os.path.abspath(path))
    ensure_directory_exists(directory)
    try:
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except OSError as e:
        raise FileOperationError(f"Error writing file {path}: {e}") from e


def read_text(path: str) -> str:
    """
    Read a UTF-8 text file.

    Raises:
        FileOperationError: If the file cannot be read
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise FileOperationError(f"Error reading file {path}: {e}") from e


def canonical_json(payload: Any) -> str:
    """Serialize ``payload`` with sorted keys and no insignificant whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_hash(payload: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form of a request body."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
