"""Shared collector for the gated acceptance criteria summary."""

LINES = []


def record_criterion(name, ok, detail=""):
    """Collect one pass/fail line per acceptance criterion for the summary."""
    tag = "PASS" if ok else "FAIL"
    line = f"[{tag}] {name}" + (f" -- {detail}" if detail else "")
    LINES.append(line)
    assert ok, line
