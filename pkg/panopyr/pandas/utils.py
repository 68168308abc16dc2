from io import StringIO
from typing import List, Union

import pandas as pd

from panopyr.pandas import TRIPLE_COLUMNS, PANDAS_TOCSV_KWARGS
from panopyr.utils import filter_kwargs


def frame_to_triples(df: pd.DataFrame, **kwargs) -> str:
    """Flatten a report table into `class_id metric value` lines.

    Args:
        df: Report table indexed by class id (or an aggregate label such as `all`), one
            column per metric.
        **kwargs: Keyword arguments for `pandas.DataFrame.to_csv`.

    Returns:
        One triple per line, rows in index order and metrics in column order.

    Example:
        >>> frame_to_triples(pd.DataFrame({"pq": [0.6]}, index=[11]))
        '11 pq 0.6\\n'
    """
    to_csv_kwargs = filter_kwargs(kwargs, PANDAS_TOCSV_KWARGS)
    to_csv_kwargs.update({"sep": " ", "header": False, "index": False})
    long = pd.DataFrame(
        [
            (index, metric, value)
            for index, row in df.iterrows()
            for metric, value in row.items()
            if pd.notna(value)
        ],
        columns=TRIPLE_COLUMNS,
    )
    return long.to_csv(**to_csv_kwargs)


def triples_to_frame(text: str) -> pd.DataFrame:
    """Inverse of `frame_to_triples`; values come back as floats.

    Args:
        text: `class_id metric value` lines.

    Returns:
        A table indexed by class id with one column per metric.
    """
    long = pd.read_csv(StringIO(text), sep=" ", header=None, names=TRIPLE_COLUMNS)
    wide = long.pivot(index="class_id", columns="metric", values="value")
    wide.columns.name = None
    return wide


def summarize_timings(
    records: pd.DataFrame,
    group_by: Union[List[str], str] = "stage",
    value: str = "seconds",
) -> pd.DataFrame:
    """Mean and sample standard deviation of timing records per group.

    Groups keep their first-seen order so pipeline stages read top to bottom.

    Args:
        records: Long table with one row per measurement.
        group_by (optional): Grouping column(s).
        value (optional): Column holding the measurement.

    Returns:
        A table indexed by group with `mean`, `std` and `reps` columns.
    """
    grouped = records.groupby(group_by, sort=False)[value]
    return pd.DataFrame(
        {"mean": grouped.mean(), "std": grouped.std(ddof=1), "reps": grouped.count()}
    )
