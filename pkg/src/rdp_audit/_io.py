"""Small file helpers."""

from __future__ import annotations

import hashlib
import math
import os
import tempfile


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Writes ``text`` to a temporary sibling file and renames it over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(x: float) -> str:
    """Shortest round-tripping decimal form of ``x``."""
    return repr(float(x))


def write_loss_file(path: str | os.PathLike, values, header: str = "") -> None:
    """Writes observations as ``trial,loss`` rows, optionally preceded by ``#`` comments."""
    lines = [f"# {line}" for line in header.splitlines()] if header else []
    lines.append("trial,loss")
    lines.extend(f"{t},{format_float(v)}" for t, v in enumerate(values))
    write_atomic(path, "\n".join(lines) + "\n")


def _split_row(line: str) -> list[str]:
    if "," in line:
        return [f.strip() for f in line.split(",")]
    if "\t" in line:
        return [f.strip() for f in line.split("\t")]
    return line.split()


def read_loss_file(path: str | os.PathLike) -> tuple[list[float], str]:
    """Parses a loss-observation file.

    The file holds either one number per line, or a header row with a
    ``loss`` column (comma, tab or whitespace delimited). Blank lines and
    lines starting with ``#`` are skipped.

    Returns:
      The values in file order and the sha256 hex digest of the raw bytes.

    Raises:
      FileNotFoundError: if the file is missing.
      ValueError: on a parse failure or non-finite value, naming the line.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValueError(f"{path}: not valid UTF-8 ({exc.reason})") from None

    values: list[float] = []
    column: int | None = None
    seen_data = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = _split_row(stripped)
        if column is None and not seen_data:
            try:
                float(fields[0])
            except ValueError:
                names = [f.lower() for f in fields]
                if "loss" not in names:
                    raise ValueError(f"{path}:{lineno}: header has no 'loss' column: {stripped!r}") from None
                column = names.index("loss")
                seen_data = True
                continue
            seen_data = True
        idx = 0 if column is None else column
        if column is None and len(fields) != 1:
            raise ValueError(f"{path}:{lineno}: expected one value per line, got {len(fields)} fields")
        if idx >= len(fields):
            raise ValueError(f"{path}:{lineno}: row has no field for the 'loss' column")
        try:
            v = float(fields[idx])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse {fields[idx]!r} as a number") from None
        if not math.isfinite(v):
            raise ValueError(f"{path}:{lineno}: non-finite value {fields[idx]!r}")
        values.append(v)
    if not values:
        raise ValueError(f"{path}: no observations found")
    return values, digest
