"""Command-line interface: ``freenoise generate|bench|inspect|metrics``.

Exit codes are 0 on success, 1 on runtime errors, and 2 on configuration
errors.
"""
import argparse
import sys
from dataclasses import fields, replace

from .config import CONVERTERS, RunConfig
from .errors import ConfigError, FreeNoiseError
from .io import (export_frames, read_container, save_hdf5_dataset,
                 write_container)
from .metrics import (consistency_sim, frechet_feature_distance,
                      kernel_feature_distance, run_benchmark,
                      split_into_clips)
from .noise_schedule import build_shuffle_plan, verify_window_coverage
from .numerics import configure_threads
from .sampler import MODES, plan_windows, sample_video
from .toy_videoldm import decode

_HELP = {
    "mode": "Inference mode: %s." % ", ".join(MODES),
    "frames": "Number of frames to generate.",
    "n_train": "Frames the model was trained on, also the window size.",
    "unit": "Noise shuffle unit, also the window stride.",
    "guidance": "Classifier-free guidance scale.",
    "seed": "Noise seed.",
    "genl_stride": "Segment stride of the genl mode (default: unit).",
    "sliding_disjoint": "Use non-overlapping windows in the sliding mode.",
    "steps": "Number of DDIM steps.",
    "prompt": 'Prompt segment as "text"@frame; repeat for several prompts.',
    "transition": "Width in frames of each prompt transition band.",
    "inject_band": "Motion injection timestep band a,b as fractions of T.",
    "decoder_layer": "Cross-attention layer threshold L.",
    "injection": "Enable motion injection.",
    "weights": "FNW1 weight file (default: seeded random weights).",
    "parallel": "Use the multi-threaded kernels (FREENOISE_THREADS caps "
                "the thread count).",
    "out": "Output FNV1 container.",
    "export_frames": "Directory receiving one P6 image per frame.",
    "export_hdf5": "HDF5 file receiving latents, video and plans.",
}

_OUTPUT_FIELDS = ("out", "export_frames", "export_hdf5")


def _add_run_arguments(parser, exclude=()):
    """One flag per RunConfig field, absent from the namespace unless given.
    """
    parser.add_argument("--config", help="Flat key = value configuration "
                        "file; flags override its values.")
    for f in fields(RunConfig):
        if f.name in exclude:
            continue
        flag = "--" + f.name.replace("_", "-")
        kwargs = dict(dest=f.name, type=CONVERTERS[f.name],
                      help=_HELP.get(f.name))
        if f.name == "prompt":
            kwargs["action"] = "append"
        elif f.type is bool:
            kwargs.update(nargs="?", const=True)
        parser.add_argument(flag, **kwargs)


def load_run_config(args):
    """Merge defaults, the configuration file, and the given flags."""
    values = vars(args)
    config = RunConfig()
    if values.get("config") is not None:
        config = RunConfig.from_file(values["config"])
    overrides = {f.name: values[f.name] for f in fields(RunConfig)
                 if f.name in values}
    if "prompt" in overrides:
        overrides["prompt"] = tuple(overrides["prompt"])
    return replace(config, **overrides)


def _run_dataset(latent, video, config):
    sampler = config.sampler_config()
    dataset = {"latents": latent, "video": video}
    if config.mode == "freenoise":
        plan = build_shuffle_plan(config.n_train, config.unit, config.frames,
                                  config.seed)
        dataset["noise_mapping"] = plan.mapping
    windows = sampler.window_plan()
    if windows is not None:
        dataset["window_starts"] = windows.starts
        dataset["window_weights"] = windows.weights
    return dataset


def cli_generate(args):
    config = load_run_config(args).validate()
    if config.parallel:
        configure_threads()
    model = config.build_model()
    timeline = config.build_timeline(model)

    if args.verbose:
        print("Sampling %d frames in %s mode" % (config.frames, config.mode))
    latent = sample_video(config.sampler_config(), timeline, model,
                          config.schedule(), verbose=args.verbose)
    video = decode(latent)

    write_container(video, config.out)
    if config.export_frames is not None:
        export_frames(video, config.export_frames)
    if config.export_hdf5 is not None:
        save_hdf5_dataset(config.export_hdf5,
                          _run_dataset(latent, video, config))
    if args.save_config is not None:
        with open(args.save_config, "w") as f:
            f.write(config.to_text())
        print("Saved %s" % args.save_config)
    return 0


def cli_bench(args):
    config = load_run_config(args).validate(require_prompt=False)
    modes = [mode.strip() for mode in args.modes.split(",") if mode.strip()]
    schedule = config.schedule()
    sampler = config.sampler_config()

    variants = [False, True] if config.parallel else [False]
    if config.parallel:
        configure_threads()
    reports = []
    for parallel in variants:
        model = replace(config, parallel=parallel).build_model()
        timeline = config.build_timeline(model) if config.prompt else None
        report = run_benchmark(modes, sampler, model, schedule, timeline,
                               repetitions=args.repetitions,
                               verbose=args.verbose)
        print(report.to_text())
        reports.append(report)

    if args.report is not None:
        with open(args.report, "w") as f:
            for report in reports:
                f.write(report.to_key_values())
        print("Saved %s" % args.report)
    return 0


def cli_inspect(args):
    config = load_run_config(args).validate(require_prompt=False)
    sampler = config.sampler_config()

    if config.mode == "freenoise":
        plan = build_shuffle_plan(config.n_train, config.unit, config.frames,
                                  config.seed)
        print("# noise mapping (frame -> base noise)")
        print(plan.to_text())
        print("window coverage: %s"
              % verify_window_coverage(plan, config.n_train, config.unit))

    print("# temporal attention windows")
    windows = sampler.window_plan()
    if windows is None:
        windows = plan_windows(config.frames, config.frames, 1)
        print("direct mode: global attention over all frames")
    print(windows.to_text())

    if config.prompt:
        model = config.build_model()
        timeline = config.build_timeline(model)
        print("# prompt routing")
        print(timeline.routing_table(config.schedule().timesteps[::-1]))
    return 0


def cli_metrics(args):
    videos = [read_container(name) for name in args.videos]
    for name, video in zip(args.videos, videos):
        print("%s consistency(lag=%d) = %.6f"
              % (name, args.lag, consistency_sim(video, lag=args.lag)))

    if args.reference:
        references = [read_container(name) for name in args.reference]
        if args.clip_length is not None:
            videos = [clip for video in videos
                      for clip in split_into_clips(video, args.clip_length)]
            references = [clip for video in references
                          for clip in split_into_clips(video,
                                                       args.clip_length)]
        print("frechet(%s) = %.6f" % (args.covariance,
                                      frechet_feature_distance(
                                          videos, references,
                                          covariance=args.covariance)))
        print("kernel = %.6f" % kernel_feature_distance(videos, references))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="freenoise",
        description="Long video sampling with rescheduled noise and fused "
                    "window attention, on a toy video diffusion model.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    generate = subparsers.add_parser(
        "generate", argument_default=argparse.SUPPRESS,
        help="Sample a video and write it to a container.")
    _add_run_arguments(generate)
    generate.add_argument("--save-config", default=None,
                          help="Write the resolved configuration here.")
    generate.add_argument("--verbose", action="store_true", default=False)
    generate.set_defaults(func=cli_generate)

    bench = subparsers.add_parser(
        "bench", argument_default=argparse.SUPPRESS,
        help="Time the inference modes.")
    _add_run_arguments(bench, exclude=_OUTPUT_FIELDS)
    bench.add_argument("--modes", default=",".join(MODES),
                       help="Comma-separated modes to benchmark.")
    bench.add_argument("--repetitions", type=int, default=5,
                       help="Timed runs per mode, after one warm-up.")
    bench.add_argument("--out", dest="report", default=None,
                       help="Write the report as key = value lines.")
    bench.add_argument("--verbose", action="store_true", default=False)
    bench.set_defaults(func=cli_bench)

    inspect = subparsers.add_parser(
        "inspect", argument_default=argparse.SUPPRESS,
        help="Print the noise mapping, windows and prompt routing.")
    _add_run_arguments(inspect)
    inspect.set_defaults(func=cli_inspect)

    metrics = subparsers.add_parser(
        "metrics", help="Compute consistency and distances of containers.")
    metrics.add_argument("videos", nargs="+", help="FNV1 containers.")
    metrics.add_argument("--reference", nargs="+", default=None,
                         help="Reference containers for the distances.")
    metrics.add_argument("--lag", type=int, default=1,
                         help="Frame distance of the consistency.")
    metrics.add_argument("--clip-length", type=int, default=None,
                         help="Cut videos into clips before the distances.")
    metrics.add_argument("--covariance", choices=["diag", "full"],
                         default="diag")
    metrics.set_defaults(func=cli_metrics)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as error:
        print("freenoise: configuration error: %s" % error, file=sys.stderr)
        return 2
    except (FreeNoiseError, RuntimeError, OSError) as error:
        print("freenoise: error: %s" % error, file=sys.stderr)
        return 1
