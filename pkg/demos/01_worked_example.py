"""
From a walking survey to model features
=======================================

A surveyor walks one path. The phone logs a reference point (RP) whenever
the surveyor taps a known location, and an RSSI scan roughly every second.
The two streams are fused into radio-map records, and each record then gets
the mask and time-lag features the imputation model consumes.
"""

import numpy as np

from radimpute import SurveyRecord, build_radio_map
from radimpute.survey import observed_mask
from radimpute.bisim import prepare_features

# three RPs and five scans over five APs, in time order
table = [
    SurveyRecord(0, "RP", rp=(0.0, 0.0)),
    SurveyRecord(1, "RSSI", rssi={0: -70, 1: -83, 2: -76}),
    SurveyRecord(3, "RSSI", rssi={0: -71, 2: -78}),
    SurveyRecord(8, "RSSI", rssi={2: -80, 3: -68}),
    SurveyRecord(9, "RP", rp=(9.0, 3.0)),
    SurveyRecord(12, "RSSI", rssi={0: -74, 4: -80}),
    SurveyRecord(13, "RSSI", rssi={1: -77, 4: -82}),
    SurveyRecord(16, "RP", rp=(16.0, 0.0)),
]

# records closer than epsilon seconds are merged: scans at t=12 and t=13
# average into one, then each RP joins the nearest scan within epsilon
rmap = build_radio_map(table, epsilon=1.0)
np.set_printoptions(linewidth=100)
print("fingerprints (NaN = no reading):")
print(rmap.fingerprints)
print("RPs:")
print(rmap.rps)
print("times:", rmap.times)

# the mask is 1 where a reading exists; the time lag counts seconds since
# each AP was last heard, which the model turns into a decay factor
features = prepare_features(rmap, observed_mask(rmap))
print("mask m:")
print(features.m.astype(int))
print("RP flag k:", features.k[:, 0].astype(int))
print("time lags delta:")
print(features.delta)
