"""Radio map differentiation and imputation for Wi-Fi fingerprint positioning.

The pipeline turns a walking-survey record table into a radio map
(``mapbuild``), labels every missing RSSI as missing-at-random or
missing-not-at-random (``differentiator``), fills the gaps with a
bidirectional sequence model (``bisim``) and locates online fingerprints
(``positioning``). ``simulator`` and ``evaluation`` supply seeded synthetic
venues and the experiment harness.
"""

__version__ = "0.1.0"

from .survey import (MAR, MNAR, MNAR_FILL, OBSERVED, RadioMap, SurveyRecord, ValidationError,
                     read_radio_map, read_survey, validate_radio_map, write_radio_map, write_survey)
from .mapbuild import build_radio_map
from .differentiator import differentiate, differentiate_map, differentiation_accuracy
from .positioning import knn_locate, wknn_locate

__all__ = [
    "MAR", "MNAR", "MNAR_FILL", "OBSERVED", "RadioMap", "SurveyRecord", "ValidationError",
    "read_radio_map", "read_survey", "validate_radio_map", "write_radio_map", "write_survey",
    "build_radio_map", "differentiate", "differentiate_map", "differentiation_accuracy",
    "knn_locate", "wknn_locate",
]
