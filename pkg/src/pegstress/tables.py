"""Plain-text and CSV renderings of the result tables."""

from __future__ import annotations

import csv
import io
import math
from typing import Sequence

from .econometrics import TERM_LABELS, OlsResult


def fmt(v, digits: int = 6) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, int):
        return f"{v:,}"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if v != 0 and (abs(v) < 1e-4 or abs(v) >= 1e7):
            return f"{v:.{3}e}"
        return f"{v:.{digits}f}"
    return str(v)


def text_table(headers: Sequence[str], rows: Sequence[Sequence], title: str | None = None) -> str:
    cells = [[str(h) for h in headers]] + [[c if isinstance(c, str) else fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(h.ljust(w) for h, w in zip(cells[0], widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in cells[1:]:
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines) + "\n"


def csv_text(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for r in rows:
        w.writerow([repr(c) if isinstance(c, float) else c for c in r])
    return buf.getvalue()


def regression_table(results: dict[str, OlsResult]) -> tuple[list[str], list[list]]:
    """Coefficient (significance) grid, one column per coin."""
    coins = list(results)
    names: list[str] = []
    for res in results.values():
        for n in res.names:
            if n not in names:
                names.append(n)
    rows = []
    for n in names:
        row = [TERM_LABELS.get(n, n)]
        for c in coins:
            res = results[c]
            if n in res.names:
                coef = res[n]
                row.append(f"{coef.value:.3g} ({coef.code})")
            else:
                row.append("")
        rows.append(row)
    rows.append(["Observations"] + [str(results[c].nobs) for c in coins])
    rows.append(["R-squared"] + [f"{results[c].r_squared:.4f}" for c in coins])
    return ["Variable"] + [c.upper() for c in coins], rows
