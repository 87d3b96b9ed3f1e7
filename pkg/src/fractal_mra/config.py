"""Process-wide knobs read from the environment."""

import os

DEFAULT_BUDGET = 2**24


def budget() -> int:
    """Cap on enumeration sizes (quadrature points, spectrum words, Gram entries)."""
    raw = os.environ.get("FRACTAL_MRA_BUDGET")
    if not raw:
        return DEFAULT_BUDGET
    value = int(raw)
    if value <= 0:
        raise ValueError("FRACTAL_MRA_BUDGET must be positive")
    return value


class BudgetExceeded(RuntimeError):
    pass
