"""
==========================
Sampling a long toy video
==========================

This example samples a 64-frame video in the four inference modes, from a
network trained on 16 frames:

- ``direct``: global temporal attention over all frames;
- ``sliding``: fused windows on independent noise;
- ``genl``: one network pass per window, averaged with uniform weights;
- ``freenoise``: fused windows on rescheduled noise.

The network is untrained, so the frames are not natural images. The
consistency of the frame features still shows how each mode ties distant
frames together.
"""
# sphinx_gallery_thumbnail_number = 2
###############################################################################
# Build the network
# -----------------
#
# The network predicts noise in a 12-channel latent space, decoded to RGB by
# a space-to-depth codec.
import matplotlib.pyplot as plt

from freenoise.metrics import consistency_sim
from freenoise.sampler import SamplerConfig, make_diffusion_schedule
from freenoise.sampler import sample_video
from freenoise.toy_videoldm import ToyVideoLDM, decode
from freenoise.viz import plot_frames

model = ToyVideoLDM.from_config()
schedule = make_diffusion_schedule(ddim_steps=10)
prompt = model.embed_prompt("a man is walking on a beach")

###############################################################################
# Sample in every mode
# --------------------
videos = {}
for mode in ["direct", "sliding", "genl", "freenoise"]:
    config = SamplerConfig(mode=mode, total=64, latent_height=8,
                           latent_width=8)
    videos[mode] = decode(sample_video(config, prompt, model, schedule,
                                       verbose=True))

###############################################################################
# Frames of the ``freenoise`` sample, every fourth frame.
plot_frames(videos["freenoise"], frames=range(0, 64, 4))
plt.show()

###############################################################################
# Consistency
# -----------
#
# The adjacent-frame consistency is the mean cosine similarity between the
# features of consecutive frames. With a lag of ``N`` frames, it measures
# the long-range consistency.
plt.figure(figsize=(6, 3))
for lag, offset in [(1, -0.2), (16, 0.2)]:
    values = [consistency_sim(video, lag=lag) for video in videos.values()]
    plt.bar([ii + offset for ii in range(len(values))], values, width=0.4,
            label="lag=%d" % lag)
plt.xticks(range(len(videos)), list(videos))
plt.ylabel("consistency")
plt.legend()
plt.show()
