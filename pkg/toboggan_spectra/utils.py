import json
import logging
import sys
import time
from pathlib import Path
from typing import IO, List, Optional

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)

FORMAT_LINE = "# format: 1"
FLOAT_FORMAT = "%.10g"


def _to_plain(data):
    if isinstance(data, BaseModel):
        return data.model_dump()
    if isinstance(data, (list, tuple)):
        return [_to_plain(item) for item in data]
    if isinstance(data, dict):
        return {key: _to_plain(value) for key, value in data.items()}
    return data


def save_json(
    data,
    outpath: Optional[Path],
    filename: Optional[str] = None,
    retries: int = 3,
    delay: float = 1.0,
):
    """Write ``data`` as indented JSON; ``outpath=None`` writes to stdout."""
    data = _to_plain(data)
    if outpath is None:
        json.dump(data, sys.stdout, indent=4)
        sys.stdout.write("\n")
        return

    path = Path(outpath) / filename if filename else Path(outpath)
    attempt = 0
    while attempt < retries:
        try:
            with path.open("w", encoding="utf-8") as f:
                json.dump(data, f, indent=4)
                f.write("\n")
            logger.info(f"Data saved to {path}.")
            break
        except IOError:
            attempt += 1
            logger.error(
                f"Failed to save data to {path}. Retrying ({attempt}/{retries})..."
            )
            time.sleep(delay)
    else:
        logger.error(f"Failed to save data to {path} after {retries} attempts.")


class CsvStream:
    """CSV writer that emits the format line and header once, then appends frames.

    Each frame is flushed immediately so partial sweeps survive interruption.
    """

    def __init__(self, outpath: Optional[Path], columns: List[str]):
        self.outpath = Path(outpath) if outpath is not None else None
        self.columns = columns
        self.rows_written = 0
        self._handle: Optional[IO[str]] = None

    def _open(self) -> IO[str]:
        if self._handle is None:
            if self.outpath is None:
                self._handle = sys.stdout
            else:
                self._handle = self.outpath.open("w", encoding="utf-8", newline="")
            self._handle.write(FORMAT_LINE + "\n")
            self._handle.write(",".join(self.columns) + "\n")
        return self._handle

    def write(self, frame: pd.DataFrame) -> None:
        handle = self._open()
        if len(frame):
            frame[self.columns].to_csv(
                handle,
                header=False,
                index=False,
                float_format=FLOAT_FORMAT,
                lineterminator="\n",
            )
            self.rows_written += len(frame)
        handle.flush()

    def close(self) -> None:
        self._open()
        if self._handle is not None and self._handle is not sys.stdout:
            self._handle.close()
            logger.info(f"Wrote {self.rows_written} rows to {self.outpath}.")
        self._handle = None

    def __enter__(self) -> "CsvStream":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_csv(frame: pd.DataFrame, outpath: Optional[Path]) -> None:
    """Write one table with the versioned header; ``outpath=None`` writes to stdout."""
    with CsvStream(outpath, list(frame.columns)) as stream:
        stream.write(frame)


def write_table(frame: pd.DataFrame, outpath: Optional[Path], fmt: str = "csv") -> None:
    if fmt == "csv":
        write_csv(frame, outpath)
    elif fmt == "json":
        save_json({"format": 1, "rows": frame.to_dict(orient="records")}, outpath)
    else:
        raise ValueError(f"Unsupported output format: {fmt}. Supported formats are csv, json")
