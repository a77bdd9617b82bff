import json
import logging
from pathlib import Path

import pandas as pd

from toboggan_spectra.spectrum import SpectralTable

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = {"epsilon", "lambda", "energy"}


class TableLoader:
    """Reads a sweep table written by ``toboggan sweep`` back into a SpectralTable."""

    def __init__(self, table_path: str) -> None:
        self.table_path = Path(table_path)

    def validate_file(self, file_path: Path) -> None:
        if not file_path.exists():
            raise FileNotFoundError(f"The file {file_path} does not exist.")
        if file_path.suffix.lower() not in {".json", ".csv"}:
            raise ValueError(
                f"Unsupported file format: {file_path.suffix}. Supported formats are .json, .csv"
            )

    def _read_file(self, file_path: Path) -> pd.DataFrame:
        if file_path.suffix.lower() == ".csv":
            return pd.read_csv(file_path, comment="#")
        with file_path.open(encoding="utf-8") as f:
            data = json.load(f)
        if isinstance(data, dict):
            if data.get("format", 1) != 1:
                raise ValueError(f"Unsupported table format version: {data.get('format')}")
            data = data.get("rows", [])
        return pd.DataFrame(data)

    def load_table(self) -> SpectralTable:
        self.validate_file(self.table_path)
        df = self._read_file(self.table_path)
        missing = REQUIRED_COLUMNS - set(df.columns)
        if missing:
            raise ValueError(
                f"Table {self.table_path} is missing columns: {', '.join(sorted(missing))}"
            )
        if df.empty:
            logger.warning(f"Table {self.table_path} contains no rows.")
        logger.info(f"Loaded {len(df)} rows from {self.table_path}.")
        return SpectralTable.from_rows(df)
