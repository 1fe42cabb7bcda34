"""CSV output. RFC-4180 quoting, LF line endings, reals to 9 significant digits."""
from __future__ import annotations

import csv
import io
import sys
from pathlib import Path
from typing import Iterable, Sequence

from .actions import ActionIndexMap

POLICY_FIELDS = ("state_index", "s_g", "s_b", "m_g", "m_b", "action_index", "a_g", "a_b", "value")


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    if hasattr(value, "item"):  # numpy scalar
        return fmt(value.item())
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    text = render_csv(header, rows)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(Path(path), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def policy_rows(policy, space, index_map: ActionIndexMap):
    for i, state in enumerate(space):
        a = policy.action(i)
        yield (i, *state, index_map.index(a), a.a_g, a.a_b, float(policy.values[i]))


def read_csv(path) -> list[dict]:
    with open(Path(path), encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
