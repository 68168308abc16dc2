import numpy as np
import pandas as pd

from panopyr.pandas.utils import frame_to_triples, summarize_timings, triples_to_frame

import logging

LOGGER = logging.getLogger(__name__)


def test_frame_to_triples():
    df = pd.DataFrame({"pq": [0.5, 1.0], "sq": [0.75, 1.0]}, index=[11, 12])
    TEXT = "11 pq 0.5\n11 sq 0.75\n12 pq 1.0\n12 sq 1.0\n"
    assert frame_to_triples(df) == TEXT


def test_frame_to_triples_skips_missing_values():
    df = pd.DataFrame({"iou": [0.5, np.nan], "miou": [np.nan, 0.5]}, index=[0, "all"])
    assert frame_to_triples(df) == "0 iou 0.5\nall miou 0.5\n"


def test_frame_to_triples_ignores_unrelated_kwargs():
    df = pd.DataFrame({"ap": [0.25]}, index=["all"])
    assert frame_to_triples(df, bucket="ignored", float_format="%.3f") == "all ap 0.250\n"


def test_triples_to_frame():
    frame = triples_to_frame("11 pq 0.5\n11 sq 0.75\n12 pq 1.0\n12 sq 1.0\n")
    assert list(frame.index) == [11, 12]
    assert frame.loc[11, "sq"] == 0.75
    assert frame.loc[12, "pq"] == 1.0


def test_summarize_timings_keeps_stage_order():
    records = pd.DataFrame(
        {
            "stage": ["nms", "assign", "nms", "assign"],
            "seconds": [1.0, 2.0, 3.0, 6.0],
        }
    )
    summary = summarize_timings(records)
    assert list(summary.index) == ["nms", "assign"]
    assert summary.loc["nms", "mean"] == 2.0
    assert summary.loc["assign", "std"] == np.std([2.0, 6.0], ddof=1)
    assert summary.loc["assign", "reps"] == 2
