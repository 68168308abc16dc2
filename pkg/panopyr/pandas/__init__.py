PANDAS_TOCSV_KWARGS = [
    "sep",
    "na_rep",
    "float_format",
    "columns",
    "header",
    "index",
    "index_label",
    "line_terminator",
    "lineterminator",
    "decimal",
]

TRIPLE_COLUMNS = ["class_id", "metric", "value"]
