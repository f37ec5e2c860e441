import matplotlib.pyplot as plt
import numpy as np

from .motion_injection import interpolation_weights


def plot_shuffle_plan(plan, ax=None, cmap="tab20"):
    """Plot the base-noise index of every frame of a shuffle plan.

    Parameters
    ----------
    plan : ShufflePlan
        Rescheduled noise mapping.
    ax : Axes or None
        Matplotlib Axes where the plan will be plotted. If None, the
        current figure is used.
    cmap : str
        Colormap used to color the base-noise indices.

    Returns
    -------
    ax : Axes
        Matplotlib Axes where the plan was plotted.
    """
    ax = plt.gca() if ax is None else ax
    ax.imshow(plan.mapping[None], aspect="auto", cmap=cmap,
              interpolation="nearest", vmin=0, vmax=plan.n_train - 1)
    for frame, base in enumerate(plan.mapping):
        ax.text(frame, 0, str(base), ha="center", va="center", fontsize=6)
    for boundary in range(plan.n_train, plan.total, plan.unit):
        ax.axvline(boundary - 0.5, color="k", linewidth=0.5)
    ax.set_yticks([])
    ax.set_xlabel("frame")
    ax.set_title("base noise index (units of %d frames)" % plan.unit)
    return ax


def plot_window_weights(plan, ax=None, normalized=True):
    """Plot the fusion weight of every window over the frames.

    Parameters
    ----------
    plan : WindowPlan
    ax : Axes or None
    normalized : bool
        Plot the per-frame normalized weights, or the raw weights.

    Returns
    -------
    ax : Axes
    """
    ax = plt.gca() if ax is None else ax
    weights = plan.weights if normalized else plan.raw_weights
    for jj, start in enumerate(plan.starts):
        frames = np.arange(start, start + plan.window)
        ax.plot(frames, weights[jj], marker=".", linewidth=1,
                label="window %d" % jj)
    ax.set_xlabel("frame")
    ax.set_ylabel("weight")
    ax.set_xlim(-0.5, plan.total - 0.5)
    ax.grid()
    return ax


def plot_frames(video, n_columns=8, frames=None, figsize=None):
    """Plot frames of a decoded RGB video in a grid.

    Parameters
    ----------
    video : array of shape (3, n_frames, height, width)
    n_columns : int
        Number of frames per row.
    frames : list of int or None
        Frames to plot. If None, all frames are plotted.
    figsize : tuple or None

    Returns
    -------
    fig : Figure
    """
    video = np.asarray(video, dtype=np.float64)
    frames = range(video.shape[1]) if frames is None else frames
    frames = list(frames)
    low, high = video.min(), video.max()
    scaled = (video - low) / (high - low) if high > low else video * 0

    n_rows = -(-len(frames) // n_columns)
    if figsize is None:
        figsize = (1.2 * n_columns, 1.2 * n_rows)
    fig, axs = plt.subplots(n_rows, n_columns, figsize=figsize,
                            squeeze=False)
    for ax in axs.ravel():
        ax.axis("off")
    for ax, frame in zip(axs.ravel(), frames):
        ax.imshow(scaled[:, frame].transpose(1, 2, 0), interpolation="nearest")
        ax.set_title("%d" % frame, fontsize=7)
    return fig


def plot_routing(timeline, timesteps, ax=None):
    """Plot which embedding each cross-attention layer receives.

    Parameters
    ----------
    timeline : PromptTimeline
    timesteps : array of int
        Timesteps to show, for example the DDIM timesteps.
    ax : Axes or None

    Returns
    -------
    ax : Axes
    """
    ax = plt.gca() if ax is None else ax
    timesteps = np.sort(np.asarray(timesteps))[::-1]
    table = np.array([[timeline.routes_target(int(t), ll)
                       for ll in range(timeline.n_layers)]
                      for t in timesteps], dtype=float)
    ax.imshow(table, aspect="auto", cmap="coolwarm", vmin=0, vmax=1,
              interpolation="nearest")
    step = max(len(timesteps) // 10, 1)
    ax.set_yticks(np.arange(0, len(timesteps), step))
    ax.set_yticklabels(timesteps[::step])
    ax.set_xticks(np.arange(timeline.n_layers))
    ax.set_xlabel("cross-attention layer")
    ax.set_ylabel("timestep")
    ax.set_title("target (red) or first prompt (blue)")
    return ax


def plot_prompt_weights(timeline, ax=None):
    """Plot the weight of each prompt in the per-frame target embedding."""
    ax = plt.gca() if ax is None else ax
    weights = interpolation_weights(timeline)
    texts = timeline.texts or ["prompt %d" % kk
                               for kk in range(len(weights))]
    for text, row in zip(texts, weights):
        ax.plot(row, label=text)
    for n_gamma, n_tau in timeline.transitions:
        ax.axvspan(n_gamma - 0.5, n_tau - 0.5, color="0.9", zorder=0)
    ax.set_xlabel("frame")
    ax.set_ylabel("weight")
    ax.legend(fontsize=7)
    return ax


def plot_bench_report(report, key="total_wall_time", ax=None):
    """Bar plot of one measurement of a benchmark report.

    Parameters
    ----------
    report : BenchReport
    key : str
        Attribute of :class:`~freenoise.metrics.BenchEntry` to plot.
    ax : Axes or None

    Returns
    -------
    ax : Axes
    """
    ax = plt.gca() if ax is None else ax
    modes = list(report.entries)
    values = [getattr(report.entries[mode], key) for mode in modes]
    bars = ax.bar(modes, values, color="C0")
    ax.bar_label(bars, fmt="%.3g", fontsize=7)
    ax.set_ylabel(key.replace("_", " "))
    ax.set_title("%d frames, %d steps" % (report.total, report.steps))
    return ax
