"""
Radar link budget and mounting geometry
=======================================

Three radars watch the room: one at chest height on the back wall, one
high on the side wall tilted down, one on the ceiling looking straight
down. This script prints the numbers that follow from the chirp profile
and shows where each radar's boresight meets the room.
"""

import numpy as np

from mmtrack.config import DEFAULT_RADARS
from mmtrack.geometry import apply_transform, boresight, build_transform, in_field_of_view, invert
from mmtrack.radar_math import summary

###############################################################################
# The chirp profile
# -----------------
# A 4 GHz sweep gives a range bin of a little under four centimetres. The
# last table is the chance that at least two of N radars sharing the band
# pick overlapping chirp slots.

s = summary()
print(f"range resolution : {s['range_resolution_m'] * 100:.2f} cm")
print(f"IF at 4 m        : {s['if_frequency_at_max_distance_hz'] / 1e6:.3f} MHz")
print(f"max velocity     : {s['max_unambiguous_velocity_m_s']:.2f} m/s")
for n, p in s["interference_probability"].items():
    print(f"  {n} radars interfere with probability {p:.4f}")

###############################################################################
# Where the radars look
# ---------------------
# Each pose becomes one 4x4 transform from radar-local to room coordinates.

for pose in DEFAULT_RADARS:
    t = build_transform(pose)
    d = boresight(t)
    tilt = np.degrees(np.arcsin(d[2]))
    print(f"radar {pose.radar_id} at {pose.position}: boresight {np.round(d, 3)}, {tilt:+.0f} deg from level")

###############################################################################
# What each radar can see
# -----------------------
# A person's head at 1.7 m and feet at the floor, two metres into the room.

person = np.array([[-0.3, 2.0, 1.7], [-0.3, 2.0, 1.0], [-0.3, 2.0, 0.1]])
for pose in DEFAULT_RADARS:
    local = apply_transform(invert(build_transform(pose)), person)
    print(f"radar {pose.radar_id} sees head/chest/feet: {in_field_of_view(pose.fov, local).tolist()}")
