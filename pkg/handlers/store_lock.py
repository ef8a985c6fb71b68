"""
This module serializes CLI invocations that touch the same snapshot.

Functions:
    store_lock(store_path) -> Iterator[None]:
        Holds an exclusive advisory lock on "<store>.lock" for the duration of the block.
"""
import fcntl
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path


@contextmanager
def store_lock(store_path: str | Path) -> Iterator[None]:
    lock_path = Path(f"{store_path}.lock")
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    with open(lock_path, "a") as lock_file:
        fcntl.flock(lock_file, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(lock_file, fcntl.LOCK_UN)
