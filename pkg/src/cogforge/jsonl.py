"""JSON Lines and atomic-file helpers shared by the pipeline and CLI."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator


def read_rows(path: str) -> Iterator[dict]:
    """Yield one dict per non-blank line; errors carry path and line number."""
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(row, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield row


def dump_row(row: dict) -> str:
    # sort_keys so identical content is identical bytes regardless of how the
    # dict was assembled; resume determinism depends on this.
    return json.dumps(row, ensure_ascii=False, sort_keys=True)


def write_rows(path: str, rows: Iterable[dict]) -> int:
    written = 0
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(dump_row(row))
            handle.write("\n")
            written += 1
    return written


def write_json_atomic(path: str, obj: dict) -> None:
    """Write via a sibling temp file and rename, so readers never see a torn file."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(obj, handle, ensure_ascii=False, sort_keys=True, indent=1)
        handle.write("\n")
    os.replace(tmp, path)
