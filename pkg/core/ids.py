"""
This module hands out sequential record ids.

Classes:
    SequentialIds: Counter-backed id source, `m000001`, `m000002`, ...
"""
ID_PREFIX = "m"
ID_WIDTH = 6


class SequentialIds:
    """Deterministic id source; an id is only consumed by `take`."""

    def __init__(self, next_value: int = 1) -> None:
        if next_value < 1:
            raise ValueError("id counter starts at 1")
        self.next_value = next_value

    def peek(self) -> str:
        """The id the next `take` returns."""
        return f"{ID_PREFIX}{self.next_value:0{ID_WIDTH}d}"

    def take(self) -> str:
        record_id = self.peek()
        self.next_value += 1
        return record_id
