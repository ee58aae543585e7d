"""Shared record of acceptance outcomes, printed at the end of the pytest run."""

RESULTS: dict[int, tuple[str, bool, str]] = {}


def line(number: int) -> str:
    title, ok, detail = RESULTS[number]
    return f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}  {detail}"
