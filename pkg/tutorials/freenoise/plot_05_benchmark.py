"""
=========
Benchmark
=========

Generating ``M`` frames with fused windows costs one network pass per
denoising step, while Genl costs one pass per window. This example times the
four inference modes on the toy network.
"""
###############################################################################
# Time the modes
# --------------
#
# Each mode runs once to compile the numeric kernels, then three timed runs.
import matplotlib.pyplot as plt

from freenoise.metrics import run_benchmark
from freenoise.sampler import MODES, SamplerConfig, make_diffusion_schedule
from freenoise.toy_videoldm import ToyVideoLDM
from freenoise.viz import plot_bench_report

model = ToyVideoLDM.from_config()
schedule = make_diffusion_schedule(ddim_steps=5)
config = SamplerConfig(total=64, latent_height=8, latent_width=8)
report = run_benchmark(MODES, config, model, schedule, repetitions=3,
                       verbose=True)
print(report.to_text())

###############################################################################
# Genl is several times slower than the fused-window modes, which all run a
# single pass per step.
fig, axs = plt.subplots(1, 2, figsize=(10, 3))
plot_bench_report(report, ax=axs[0])
plot_bench_report(report, key="passes_per_step", ax=axs[1])
plt.tight_layout()
plt.show()

print("genl / freenoise: %.2f" % report.ratio("genl", "freenoise"))
