"""One line per acceptance criterion, printed in the terminal summary."""

LINES: list[str] = []


def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
    status = "PASS" if ok else "FAIL"
    LINES.append(f"[{status}] AC{number:02d} {title}" + (f": {detail}" if detail else ""))
    print(LINES[-1])
    return ok
