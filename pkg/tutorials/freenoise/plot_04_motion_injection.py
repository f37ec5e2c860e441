"""
================
Motion injection
================

With several prompts, each prompt covers a segment of frames, and the
embedding changes smoothly over a transition band at each boundary. Feeding
the interpolated embedding to every cross-attention layer at every step
breaks the layout of the video, so the interpolated (target) embedding only
reaches some layers:

- during the middle denoising steps, where the motion is decided;
- in the decoder layers, at every step.

The other layers keep the first prompt of the current pair.
"""
###############################################################################
# Build a two-prompt timeline
# ---------------------------
import matplotlib.pyplot as plt

from freenoise.motion_injection import ConditionResolver, build_timeline
from freenoise.sampler import SamplerConfig, make_diffusion_schedule
from freenoise.sampler import sample_video
from freenoise.toy_videoldm import ToyVideoLDM, decode
from freenoise.viz import plot_frames, plot_prompt_weights, plot_routing

model = ToyVideoLDM.from_config()
prompts = ["a man is boating on a lake", "a man is walking on a beach"]
timeline = build_timeline(prompts, [32, 32], model)
print(timeline.transitions)

plt.figure(figsize=(8, 3))
plot_prompt_weights(timeline)
plt.show()

###############################################################################
# Routing
# -------
#
# Each cross-attention layer receives either the target embedding (T) or the
# first prompt of the pair (P), depending on the timestep.
schedule = make_diffusion_schedule(ddim_steps=20)
print(timeline.routing_table(schedule.timesteps[::-1][::4]))

plt.figure(figsize=(4, 5))
plot_routing(timeline, schedule.timesteps)
plt.show()

###############################################################################
# Sample
# ------
#
# The resolver records the branch chosen for every timestep, layer and
# frame, which allows checking the routing of a full run.
config = SamplerConfig(total=64, latent_height=8, latent_width=8)
resolver = ConditionResolver(timeline)
latent = sample_video(config, timeline, model, schedule, resolver=resolver)
print("%d routing decisions" % len(resolver.log))

plot_frames(decode(latent), frames=range(24, 40, 2))
plt.show()
