import csv
import json
import logging
import os
from datetime import date, datetime
from typing import Any, Iterable, List, Union

from pseudomarket import constants
from pseudomarket.simulator import TrialSummary

logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """
    Render a float with 9 significant digits, independent of the locale.

    Examples
    --------
    format_float(1 / 3)
    >>> 0.333333333
    format_float(12345.0)
    >>> 12345
    """
    return format(float(value), constants.FLOAT_FORMAT)


class DateDirectoryTreeCreator:
    """
    Place result files in a directory tree derived from a date, e.g.
    ``results/2024/05``.
    """

    def __init__(
        self,
        date_: date,
        date_pattern: str = "%Y/%m",
        root_dir: str = "results",
    ) -> None:
        """
        Parameters
        ----------
        date_ : date
            Date the tree is built from.
        date_pattern : str, optional
            Directory structure as strftime pattern, by default "%Y/%m".
        root_dir : str, optional
            Base directory of the tree, by default "results".
        """
        self.date_pattern = date_pattern
        self.date_ = date_
        self.root_dir = root_dir

    def create_file_path_from_date(self) -> str:
        """Directory path for the date, without creating anything."""
        return os.path.join(
            self.root_dir, self.date_.strftime(self.date_pattern)
        )

    def make_dir_tree_from_date(self) -> str:
        """Create the date directory and return its path."""
        dir_path = self.create_file_path_from_date()
        os.makedirs(dir_path, exist_ok=True)
        return dir_path


def create_file_name_from_date(
    date_or_datetime: Union[date, datetime],
    date_pattern: Union[str, None] = None,
    prefix: str = "",
    suffix: str = "",
    extension: str = "",
) -> str:
    """
    Create a file name from a date object.

    Parameters
    ----------
    date_or_datetime : Union[date, datetime]
        Provided date or datetime object.
    date_pattern : str, optional
        Date pattern in the file name, by default "%Y-%m-%d" for dates and
        "%Y-%m-%dT%H-%M-%S" for datetimes.
    prefix : str, optional
        String before the date, by default "".
    suffix : str, optional
        String after the date, by default "".
    extension : str, optional
        File extension including ".", e.g. ".csv", by default "".

    Returns
    -------
    str
        The full file name.
    """
    if date_pattern is None:
        if isinstance(date_or_datetime, datetime):
            date_pattern = "%Y-%m-%dT%H-%M-%S"
        else:
            date_pattern = "%Y-%m-%d"
    return prefix + date_or_datetime.strftime(date_pattern) + suffix + extension


def default_output_path(
    name: str, now: Union[datetime, None] = None, root_dir: str = "results"
) -> str:
    """
    ``results/<YYYY>/<MM>/<name>_<timestamp>.csv``; the directories are
    created.
    """
    if now is None:
        now = datetime.now()
    creator = DateDirectoryTreeCreator(now, root_dir=root_dir)
    dir_path = creator.make_dir_tree_from_date()
    return os.path.join(
        dir_path,
        create_file_name_from_date(now, prefix=f"{name}_", extension=".csv"),
    )


def summary_path_for(csv_path: str) -> str:
    """Summary document next to the CSV: ``<stem>.summary.json``."""
    stem, _ = os.path.splitext(csv_path)
    return stem + ".summary.json"


def trial_rows(rows: Iterable[TrialSummary]) -> List[List[str]]:
    """One formatted CSV row per (trial, agent), trials in order."""
    lines = []
    for row in rows:
        for agent in range(len(row.total_utility)):
            lines.append(
                [
                    str(row.trial),
                    str(agent),
                    format_float(row.total_utility[agent]),
                    format_float(row.total_payment[agent]),
                    format_float(row.utilization[agent]),
                    str(int(row.blocked_rounds[agent])),
                ]
            )
    return lines


def write_trials_csv(rows: Iterable[TrialSummary], file_path: str) -> None:
    parent = os.path.dirname(file_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(file_path, "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(constants.CSV_COLUMNS)
        writer.writerows(trial_rows(rows))
    logger.info("Saved to: %s", file_path)


def save_to_json(obj_: Any, file_path: str) -> None:
    with open(file_path, "w", encoding="utf-8") as fp:
        json.dump(obj_, fp, indent=4)
    logger.info("Saved to: %s", file_path)
