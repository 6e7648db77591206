"""Shared collector for the one-line acceptance verdicts."""

LINES = []


def record(code: str, ok: bool, detail: str) -> None:
    line = f"{code} {'PASS' if ok else 'FAIL'}: {detail}"
    LINES.append(line)
    print(line)
