"""Multi-prompt conditioning with motion injection.

Consecutive prompts meet at breakpoints. Around each breakpoint a
transition band ``[n_gamma, n_tau)`` linearly interpolates the two prompt
embeddings. Cross-attention layers then receive either the per-frame target
embedding or the first prompt of the active pair, depending on the
denoising timestep and on the layer index.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .numerics import as_array

TARGET = "target"
BASE = "base"


def interpolate_prompt(p1, p2, n, n_gamma, n_tau):
    """Embedding of frame ``n`` in the transition from ``p1`` to ``p2``.

    Parameters
    ----------
    p1, p2 : array of shape (text_tokens, text_dim)
        Prompt embeddings before and after the transition.
    n : int
        Frame index.
    n_gamma, n_tau : int
        Transition band, ``n_gamma < n_tau``.

    Returns
    -------
    embedding : array of shape (text_tokens, text_dim)
        ``p1`` before ``n_gamma``, ``p2`` from ``n_tau`` on, and the linear
        interpolation in between.
    """
    if not n_gamma < n_tau:
        raise ConfigError("transition band needs n_gamma < n_tau, got %d, %d"
                          % (n_gamma, n_tau), key="transition")
    p1, p2 = as_array(p1), as_array(p2)
    if n < n_gamma:
        return p1.copy()
    if n >= n_tau:
        return p2.copy()
    coef = (n - n_gamma) / (n_tau - n_gamma)
    p1_64 = p1.astype(np.float64)
    return as_array(p1_64 + coef * (p2.astype(np.float64) - p1_64))


@dataclass(frozen=True)
class PromptTimeline:
    """Per-frame prompt conditioning of a sampling run.

    Attributes
    ----------
    prompts : list of arrays of shape (text_tokens, text_dim)
        Prompt embeddings in frame order.
    transitions : list of (int, int)
        ``(n_gamma, n_tau)`` band between prompts ``k`` and ``k + 1``.
    total : int
        Number of frames M.
    t_alpha, t_beta : int
        Injection band over denoising timesteps, exclusive on both ends.
    decoder_layer : int
        Layer threshold L. Cross-attention layers ``l > L`` always receive
        the target embedding.
    n_layers : int
        Number of cross-attention layers of the model.
    n_timesteps : int
        Number of training timesteps T.
    injection : bool
        If False, every layer at every step receives the target embedding.
    texts : list of str
        Source prompt strings, for display.
    """
    prompts: list = field(repr=False)
    transitions: list
    total: int
    t_alpha: int
    t_beta: int
    decoder_layer: int
    n_layers: int
    n_timesteps: int = 1000
    injection: bool = True
    texts: list = None

    def __post_init__(self):
        if len(self.prompts) < 1:
            raise ConfigError("at least one prompt is required", key="prompt")
        if len(self.transitions) != len(self.prompts) - 1:
            raise ConfigError("%d prompts need %d transitions, got %d"
                              % (len(self.prompts), len(self.prompts) - 1,
                                 len(self.transitions)), key="transition")
        previous = 0
        for n_gamma, n_tau in self.transitions:
            if not previous <= n_gamma < n_tau <= self.total:
                raise ConfigError(
                    "transition band [%d, %d) must satisfy %d <= n_gamma < "
                    "n_tau <= %d" % (n_gamma, n_tau, previous, self.total),
                    key="transition")
            previous = n_tau
        if not self.t_alpha < self.t_beta <= self.n_timesteps:
            raise ConfigError("injection band needs t_alpha < t_beta <= %d, "
                              "got %d, %d" % (self.n_timesteps, self.t_alpha,
                                              self.t_beta),
                              key="inject_band")
        if not 0 <= self.decoder_layer < self.n_layers:
            raise ConfigError("must be in [0, %d), got %d"
                              % (self.n_layers, self.decoder_layer),
                              key="decoder_layer")

    def active_pair(self, n):
        """Index ``k`` of the prompt pair ``(k, k + 1)`` governing frame n.

        The first transition whose band ends after ``n`` is active; frames
        after the last band belong to the last pair.
        """
        for kk, (_, n_tau) in enumerate(self.transitions):
            if n < n_tau:
                return kk
        return max(len(self.transitions) - 1, 0)

    def target_embedding(self, n):
        """Interpolated target embedding of frame ``n``."""
        if not self.transitions:
            return as_array(self.prompts[0])
        kk = self.active_pair(n)
        n_gamma, n_tau = self.transitions[kk]
        return interpolate_prompt(self.prompts[kk], self.prompts[kk + 1], n,
                                  n_gamma, n_tau)

    def base_embedding(self, n):
        """First prompt of the pair governing frame ``n``."""
        return as_array(self.prompts[self.active_pair(n)])

    def routes_target(self, t, layer):
        """Whether cross-attention layer ``layer`` at timestep ``t`` sees the
        target embedding."""
        if not self.injection:
            return True
        return self.t_alpha < t < self.t_beta or layer > self.decoder_layer

    def routing_table(self, timesteps):
        """Return a text table of the routing per timestep and layer.

        ``T`` marks the target embedding, ``P`` the first prompt of the pair.
        """
        header = "t     " + " ".join("l%-2d" % ll
                                     for ll in range(self.n_layers))
        lines = ["bands: " + ", ".join("[%d, %d)" % band
                                       for band in self.transitions)
                 if self.transitions else "bands: none",
                 "inject: %d < t < %d or l > %d%s"
                 % (self.t_alpha, self.t_beta, self.decoder_layer,
                    "" if self.injection else " (disabled)"),
                 header]
        for t in timesteps:
            marks = ["T  " if self.routes_target(int(t), ll) else "P  "
                     for ll in range(self.n_layers)]
            lines.append("%-5d " % t + " ".join(marks))
        return "\n".join(lines)


@dataclass(frozen=True)
class RoutingRecord:
    t: int
    layer: int
    frame: int
    branch: str


class ConditionResolver:
    """Supply cross-attention embeddings per (timestep, layer, frame).

    Every choice is appended to ``log`` as a :class:`RoutingRecord`.

    Parameters
    ----------
    timeline : PromptTimeline
    """

    def __init__(self, timeline):
        self.timeline = timeline
        self.log = []
        self._targets = {}

    def _target(self, n):
        if n not in self._targets:
            self._targets[n] = self.timeline.target_embedding(n)
        return self._targets[n]

    def resolve(self, t, layer, frame):
        """Return the embedding of one frame and record the choice."""
        if self.timeline.routes_target(t, layer):
            self.log.append(RoutingRecord(t, layer, frame, TARGET))
            return self._target(frame)
        self.log.append(RoutingRecord(t, layer, frame, BASE))
        return self.timeline.base_embedding(frame)

    def resolve_frames(self, t, layer, frames):
        """Stack the embeddings of several frames, logged in frame order.

        Returns
        -------
        embeddings : array of shape (n_frames, text_tokens, text_dim)
        """
        return as_array(np.stack([self.resolve(t, layer, int(frame))
                                  for frame in frames]))


def resolve_condition(resolver, t, layer, frame):
    """Route one cross-attention query through ``resolver``."""
    return resolver.resolve(t, layer, frame)


def plan_transitions(segment_frames, transition_len=8):
    """Transition bands centered on the breakpoints between segments.

    Parameters
    ----------
    segment_frames : list of int
        Number of frames of each prompt segment.
    transition_len : int
        Width of each band.

    Returns
    -------
    transitions : list of (int, int)
        ``(n_gamma, n_tau)`` with ``n_gamma = breakpoint - len // 2`` and
        ``n_tau = n_gamma + len``.
    """
    if any(frames < 1 for frames in segment_frames):
        raise ConfigError("segments must have at least one frame, got %s"
                          % (list(segment_frames), ), key="prompt")
    if len(segment_frames) > 1 and transition_len < 1:
        raise ConfigError("must be >= 1, got %d" % transition_len,
                          key="transition")

    boundaries = np.concatenate([[0], np.cumsum(segment_frames)])
    transitions = []
    for kk, breakpoint in enumerate(boundaries[1:-1]):
        n_gamma = int(breakpoint) - transition_len // 2
        n_tau = n_gamma + transition_len
        if n_gamma < boundaries[kk] or n_tau > boundaries[kk + 2]:
            raise ConfigError(
                "transition [%d, %d) around frame %d does not fit inside "
                "segments [%d, %d)" % (n_gamma, n_tau, breakpoint,
                                       boundaries[kk], boundaries[kk + 2]),
                key="transition")
        if transitions and n_gamma < transitions[-1][1]:
            raise ConfigError("transitions [%d, %d) and [%d, %d) overlap"
                              % (transitions[-1] + (n_gamma, n_tau)),
                              key="transition")
        transitions.append((n_gamma, n_tau))
    return transitions


def build_timeline(prompts, segment_frames, model, n_timesteps=1000,
                   transition_len=8, t_alpha_frac=0.3, t_beta_frac=0.7,
                   decoder_layer=None, injection=True):
    """Build a prompt timeline from prompt strings.

    Parameters
    ----------
    prompts : list of str
        Prompts in frame order.
    segment_frames : list of int
        Number of frames of each prompt segment. Sums to the video length.
    model : ToyVideoLDM
        Model providing the prompt embeddings and the cross-attention
        layer count.
    n_timesteps : int
        Number of training timesteps T.
    transition_len : int
        Width of each transition band, centered on the breakpoint.
    t_alpha_frac, t_beta_frac : float
        Injection band as fractions of T.
    decoder_layer : int or None
        Layer threshold L. Defaults to the last encoder cross-attention
        layer, so that ``l > L`` selects the decoder.
    injection : bool
        Enable motion injection. If False, all layers see the target.

    Returns
    -------
    timeline : PromptTimeline
    """
    if len(prompts) == 0:
        raise InputError("at least one prompt is required")
    if len(prompts) != len(segment_frames):
        raise ConfigError("%d prompts but %d segments"
                          % (len(prompts), len(segment_frames)), key="prompt")
    transitions = plan_transitions(segment_frames, transition_len)

    if decoder_layer is None:
        decoder_layer = model.n_encoder_layers - 1
    return PromptTimeline(
        prompts=[model.embed_prompt(text) for text in prompts],
        transitions=transitions, total=int(sum(segment_frames)),
        t_alpha=int(round(t_alpha_frac * n_timesteps)),
        t_beta=int(round(t_beta_frac * n_timesteps)),
        decoder_layer=decoder_layer, n_layers=model.n_cross_attention_layers,
        n_timesteps=n_timesteps, injection=injection, texts=list(prompts))


def interpolation_weights(timeline):
    """Weight of each prompt in the target embedding of each frame.

    Returns
    -------
    weights : array of shape (n_prompts, total)
        Column ``n`` sums to 1.
    """
    weights = np.zeros((len(timeline.prompts), timeline.total))
    for n in range(timeline.total):
        if not timeline.transitions:
            weights[0, n] = 1.0
            continue
        kk = timeline.active_pair(n)
        n_gamma, n_tau = timeline.transitions[kk]
        coef = min(max((n - n_gamma) / (n_tau - n_gamma), 0.0), 1.0)
        weights[kk, n] = 1.0 - coef
        weights[kk + 1, n] = coef
    return weights
