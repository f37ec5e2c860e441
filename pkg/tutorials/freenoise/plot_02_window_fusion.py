"""
=============
Window fusion
=============

The temporal self-attention of the network was trained on ``N`` frames. On
a longer video, attention runs on overlapping windows of ``N`` frames, with a
stride of ``S`` frames. A frame covered by several windows receives a
weighted average of their outputs, where each window weighs its own central
frames more than its borders.

This example shows the windows and their fusion weights, and compares the
number of attention pairs against global attention.
"""
###############################################################################
# Plan the windows
# ----------------
import matplotlib.pyplot as plt

from freenoise.sampler import plan_windows
from freenoise.viz import plot_window_weights

plan = plan_windows(total=64, window=16, stride=4)
print(plan.to_text().splitlines()[0])

###############################################################################
# Each window weighs frame ``i`` by ``N / 2 - floor(|i - c|)``, where ``c``
# is the window center. After normalization, the weights of a frame sum to
# one.
fig, axs = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
plot_window_weights(plan, ax=axs[0], normalized=False)
axs[0].set_title("raw weights")
plot_window_weights(plan, ax=axs[1])
axs[1].set_title("normalized weights")
plt.tight_layout()
plt.show()

###############################################################################
# Frame 17 is covered by four windows.
windows, raw, normalized = plan.frame_weights(17)
print(windows, raw, normalized)

###############################################################################
# Cost of the temporal attention
# ------------------------------
#
# Global attention over ``M`` frames scores ``M ** 2`` query-key pairs per
# spatial site, while the windows score ``n_windows * N ** 2`` pairs. Genl
# runs the whole network once per window instead.
from freenoise.metrics import count_model_passes
from freenoise.sampler import MODES, SamplerConfig

for mode in MODES:
    passes, pairs = count_model_passes(SamplerConfig(mode=mode))
    print("%-10s passes=%2d pairs=%d" % (mode, passes, pairs))
