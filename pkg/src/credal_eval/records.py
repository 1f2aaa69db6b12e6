"""One test instance's raw prediction in any of the four encodings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .credal import IntervalPrediction, SampleSet
from .setfn import LabelSpace, MassFunction

POINT = "point"
SAMPLES = "samples"
INTERVALS = "intervals"
MASSES = "masses"
ENCODINGS = (POINT, SAMPLES, INTERVALS, MASSES)

Payload = Union[np.ndarray, SampleSet, IntervalPrediction, MassFunction]


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    instance_id: int
    encoding: str
    payload: Payload

    @property
    def space(self) -> LabelSpace:
        if self.encoding == POINT:
            return LabelSpace(len(self.payload))
        return self.payload.space
