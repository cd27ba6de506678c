"""Memory budget shared by every module that materializes dense arrays."""

from __future__ import annotations

import os

DEFAULT_ELEMENT_CAP = 2**28
ENV_VAR = "HAARQEC_ELEMENT_CAP"


class BudgetError(MemoryError):
    """Requested object would exceed the configured element cap."""


def element_cap(override: int | None = None) -> int:
    """Cap on complex entries per dense array; ``override`` beats the environment."""
    if override is not None:
        return int(override)
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            return int(raw)
        except ValueError as exc:
            raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from exc
    return DEFAULT_ELEMENT_CAP


def check(elements: int, what: str, cap: int | None = None) -> None:
    limit = element_cap(cap)
    if elements > limit:
        raise BudgetError(f"{what} needs {elements} elements, over the cap of {limit}")
