"""Helpers for functions that accept either a path or an open stream."""

from __future__ import annotations

import io
import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Callable, Union

logger = logging.getLogger(__name__)

Source = Union[str, Path, IO[bytes]]
Sink = Union[str, Path, IO[bytes], IO[str]]


def source_name(source: Source | Sink) -> str:
    """Best-effort display name for messages."""
    if isinstance(source, (str, Path)):
        return str(source)
    return str(getattr(source, "name", "<stream>"))


@contextmanager
def open_source(source: Source) -> Iterator[IO[bytes]]:
    """Open a path for binary reading, or pass an open stream through untouched."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        logger.debug(f"Reading {path}")
        with open(path, "rb") as f:
            yield f
    else:
        yield source


@contextmanager
def open_sink(sink: Sink) -> Iterator[Callable[[str], object]]:
    """Yield a function that writes UTF-8 text to a path, text stream or byte stream.

    Streams are left open; paths are opened and closed here.
    """
    if isinstance(sink, (str, Path)):
        path = Path(sink)
        logger.debug(f"Writing {path}")
        with open(path, "w", encoding="utf-8", newline="") as f:
            yield f.write
    elif isinstance(sink, io.TextIOBase):
        yield sink.write
    else:
        binary = sink

        def write(text: str) -> None:
            binary.write(text.encode("utf-8"))  # type: ignore[arg-type]

        yield write


def write_text(sink: Sink, text: str) -> None:
    """Write a complete document to ``sink``."""
    with open_sink(sink) as write:
        write(text)
