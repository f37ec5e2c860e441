"""
==================
Noise rescheduling
==================

A model trained on ``N`` frames has only seen sequences of ``N`` noise
frames. To generate ``M > N`` frames, the first ``N`` noise frames are drawn
as usual, and every later frame reuses one of them: frames are grouped in
units of ``S`` frames, and each unit gets a shuffled copy of the
corresponding base frames.

This example shows the resulting mapping, and checks that every window of
``N`` frames sees each base noise frame exactly once.
"""
# sphinx_gallery_thumbnail_number = 1
###############################################################################
# Build the shuffle plan
# ----------------------
#
# With ``N = 16`` training frames, units of ``S = 4`` frames, and ``M = 64``
# frames, the plan maps every frame to a base noise index.
import matplotlib.pyplot as plt
import numpy as np

from freenoise.noise_schedule import build_shuffle_plan
from freenoise.noise_schedule import verify_window_coverage
from freenoise.viz import plot_shuffle_plan

plan = build_shuffle_plan(n_train=16, unit_size=4, total=64, seed=0)
print(plan.to_text().splitlines()[14:22])

plt.figure(figsize=(12, 1.5))
plot_shuffle_plan(plan)
plt.show()

###############################################################################
# The first ``N`` frames are the identity, and every later unit is a
# permutation of the base frames of the same position modulo ``N``.
print(plan.mapping[:16])
print(plan.mapping[16:20], np.sort(plan.mapping[16:20]))

###############################################################################
# Window coverage
# ---------------
#
# Temporal attention later runs on windows of ``N`` frames with a stride of
# ``S`` frames. Each of these windows covers all ``N`` base noise frames.
print(verify_window_coverage(plan, window_size=16, stride=4))

###############################################################################
# The plan only depends on the seed, and extending the video only appends
# new units.
longer = build_shuffle_plan(n_train=16, unit_size=4, total=96, seed=0)
print(np.array_equal(longer.mapping[:64], plan.mapping))
