"""Atomic file output."""
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


@contextmanager
def atomic_path(target: PathLike) -> Iterator[Path]:
    """
    Yield a temporary path next to ``target`` and rename it into place on success.

    Readers either see the old file or the complete new one, never a partial write.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix='.tmp', dir=target.parent)
    os.close(fd)
    tmp_path = Path(tmp_name)
    try:
        yield tmp_path
        os.replace(tmp_path, target)
    except BaseException:
        tmp_path.unlink(missing_ok=True)
        raise
    logger.debug(f"Wrote {target}")


def write_text_atomic(target: PathLike, text: str) -> Path:
    """Write ``text`` to ``target`` atomically and return the final path."""
    with atomic_path(target) as tmp:
        tmp.write_text(text, encoding='utf-8')
    return Path(target)


def ensure_within(root: PathLike, candidate: PathLike) -> Path:
    """Resolve ``candidate`` and check that it lies under ``root``."""
    root_path = Path(root).resolve()
    resolved = Path(candidate).resolve()
    if resolved != root_path and root_path not in resolved.parents:
        raise ValueError(f"{resolved} escapes output directory {root_path}")
    return resolved
