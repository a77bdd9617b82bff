import sys
from typing import TYPE_CHECKING

from tqdm.auto import tqdm

if TYPE_CHECKING:
    from toboggan_spectra.spectrum import ColumnResult


class SweepProgress:
    """Progress over the epsilon columns of a sweep, drawn on stderr."""

    def __init__(self, total: int, disable: bool = False):
        self.count = 0
        self.failures = 0
        self.progress_bar = tqdm(
            total=total,
            ascii=True,
            dynamic_ncols=False,
            file=sys.stderr,
            unit="eps",
            disable=disable,
        )

    def update(self, column: "ColumnResult") -> None:
        self.count += 1
        if column.status != "success":
            self.failures += 1
        self.progress_bar.set_postfix(
            eps=f"{column.epsilon:.4g}", found=column.found_count, refresh=False
        )
        self.progress_bar.update(1)

    def close(self) -> None:
        self.progress_bar.close()

    def __enter__(self) -> "SweepProgress":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
