"""Command line: ``simulate``, ``separate``, ``stream`` and ``eval``.

Exit codes: 0 success, 1 usage/configuration, 2 I/O, 3 numerical failure.
Failures print one JSON record to stderr.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import metrics, simulate
from .errors import (BeamGuideError, ManifestError, NumericalError, WavFormatError)
from .estimators import EstimatorKind, EstimatorSpec
from .manifest import Manifest, image_filename, load_manifest, truth_filename
from .pipeline import PipelineConfig, run
from .signal import MultichannelWaveform, Provenance, SourceImageSet, StageTag
from .stft import StftConfig
from .wavio import read_wav, write_wav

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3
ESTIMATOR_CHOICES = ["oracle-signal", "oracle-irm", "external", "guided-passthrough"]
IMAGE_RE = re.compile(r"^(xhat|zhat)_s(\d+)_c(\d+)_stage(\d+)_iter(\d+)\.wav$")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- simulate ---------------------------------------------------------------

def _scene_from_json(cfg: dict, seed: int, base: Path) -> simulate.SceneSpec:
    rate = int(cfg.get("sample_rate", 8000))
    num_src = int(cfg.get("num_sources", 2))
    num_mics = int(cfg.get("num_mics", 4))
    num_samples = int(round(float(cfg.get("duration_s", 4.0)) * rate))
    if "dry_sources" in cfg:
        sources = []
        for rel in cfg["dry_sources"]:
            wave = read_wav(base / rel, expect_channels=1)
            if wave.sample_rate != rate:
                raise ManifestError(f"{rel}: sample rate {wave.sample_rate} != {rate}")
            sources.append(wave.samples[0])
    else:
        sources = list(simulate.make_dry_sources(num_src, num_samples, seed, rate, cfg.get("signal", "noise_burst")))
    rirs = None
    geometry = None
    if "rirs" in cfg:
        rirs = [[read_wav(base / rel, expect_channels=1).samples[0] for rel in row] for row in cfg["rirs"]]
    elif "mic_positions" in cfg:
        geometry = simulate.Geometry(cfg["mic_positions"], cfg["source_positions"],
                                     float(cfg.get("sound_speed", simulate.SOUND_SPEED)))
    else:
        geometry = simulate.default_geometry(len(sources), num_mics, float(cfg.get("mic_spacing", 0.05)),
                                             float(cfg.get("source_distance", 1.5)))
    return simulate.SceneSpec(
        sources=sources, rirs=rirs, geometry=geometry,
        sir_db=cfg.get("sir_db", 0.0), sir_range=tuple(cfg.get("sir_range", (-5.0, 5.0))),
        seed=seed, sample_rate=rate, noise_snr_db=cfg.get("noise_snr_db"),
    )


def cmd_simulate(args) -> int:
    cfg = {}
    base = Path.cwd()
    if args.spec:
        spec_path = Path(args.spec)
        cfg = json.loads(spec_path.read_text())
        base = spec_path.parent
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    scene = _scene_from_json(cfg, seed, base)
    mixture, truth = simulate.render_scene(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_wav(out / "mixture.wav", mixture, args.format)
    grid = []
    for s in range(truth.num_sources):
        row = []
        for c in range(truth.num_channels):
            name = truth_filename(s + 1, c + 1)
            write_wav(out / name, MultichannelWaveform(truth.images[s, c], truth.sample_rate), args.format)
            row.append(name)
        grid.append(row)
    Manifest("mixture.wav", mixture.sample_rate, truth.num_sources, truth.num_channels,
             truth=grid, metrics="metrics.json").save(out / "manifest.json")
    return EXIT_OK


# -- separate / stream ------------------------------------------------------

def _estimator(name: str, man: Manifest, truth, external, irm_exponent) -> EstimatorSpec:
    kind = EstimatorKind.parse(name)
    if kind in (EstimatorKind.ORACLE_SIGNAL, EstimatorKind.ORACLE_IRM) and truth is None:
        raise ManifestError(f"{name} estimator needs truth images in the manifest")
    return EstimatorSpec(kind, truth=truth, external=external, irm_exponent=irm_exponent)


def _image_metrics(images: SourceImageSet, truth, ref: int, taps: int):
    if truth is None:
        return None
    rep = metrics.report(images, truth, ref, taps)
    return {"sdr_db": rep.sdr_db[:, 0].tolist(), "snr_db": rep.snr_db[:, 0].tolist(),
            "permutation": list(rep.permutation[0]), "mean_sdr_db": rep.mean_sdr,
            "mean_snr_db": rep.mean_snr}


def _write_images(out: Path, kind: str, images: SourceImageSet):
    for s in range(images.num_sources):
        for c in range(images.num_channels):
            wave = MultichannelWaveform(images.images[s, c], images.sample_rate)
            write_wav(out / image_filename(kind, s + 1, c + 1, images.stage_tag), wave, "float32")


def cmd_separate(args, mode: str) -> int:
    if args.estimator == "guided-passthrough":
        raise UsageError("guided-passthrough needs beamformed guidance and cannot run stage 1; "
                         "use it with --stage2-estimator")
    man = load_manifest(args.manifest)
    mixture = man.load_mixture()
    if not np.all(np.isfinite(mixture.samples)):
        raise NumericalError(f"{man.mixture}: mixture contains non-finite samples")
    truth = man.load_truth() if man.truth is not None else None
    external = man.load_estimates() if man.estimates else {}
    stft = StftConfig.from_ms(args.frame_ms, args.hop_ms, mixture.sample_rate)
    stage1 = _estimator(args.estimator, man, truth, external, args.irm_exponent)
    stage2 = _estimator(args.stage2_estimator, man, truth, external, args.irm_exponent) if args.iterations else None
    config = PipelineConfig(stage1, stage2, stft, args.iterations, args.loading, args.ref_channel, mode)
    if not 1 <= args.ref_channel <= mixture.num_channels:
        raise UsageError(f"--ref-channel {args.ref_channel} outside [1, {mixture.num_channels}]")
    _, trace = run(config, mixture)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for entry in trace:
        for images in (entry.xhat, entry.zhat):
            if not np.all(np.isfinite(images.images)):
                raise NumericalError(f"non-finite samples in {entry.stage_tag.key}")
        _write_images(out, "xhat", entry.xhat)
        _write_images(out, "zhat", entry.zhat.replace(stage_tag=entry.stage_tag))
        entries.append({
            "stage": entry.stage_tag.stage,
            "iteration": entry.stage_tag.iteration,
            "permutations": [list(p) for p in entry.permutations.perms],
            "scm": entry.scm_summary,
            "xhat": _image_metrics(entry.xhat, truth, args.ref_channel, args.taps),
            "zhat": _image_metrics(entry.zhat, truth, args.ref_channel, args.taps),
        })
    _dump_json(out / "trace.json", {
        "schema_version": 1,
        "mode": mode,
        "estimator_stage1": stage1.kind.value,
        "estimator_stage2": stage2.kind.value if stage2 else None,
        "iterations": args.iterations,
        "reference_channel": args.ref_channel,
        "frame_len": stft.frame_len,
        "hop": stft.hop,
        "loading": args.loading,
        "taps": args.taps,
        "entries": entries,
    })
    return EXIT_OK


# -- eval -------------------------------------------------------------------

def cmd_eval(args) -> int:
    man = load_manifest(args.manifest)
    truth = man.load_truth()
    mixture = man.load_mixture()
    est_dir = Path(args.estimates)
    groups = defaultdict(dict)
    for path in sorted(est_dir.iterdir()):
        m = IMAGE_RE.match(path.name)
        if m:
            kind, s, c, stage, it = m.group(1), *map(int, m.groups()[1:])
            groups[(kind, stage, it)][(s, c)] = path
    if not groups:
        raise ManifestError(f"{est_dir}: no xhat_/zhat_ estimate files found")
    results = []
    for (kind, stage, it), files in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][2], kv[0][0])):
        grid = np.zeros(truth.images.shape)
        for s in range(truth.num_sources):
            for c in range(truth.num_channels):
                if (s + 1, c + 1) not in files:
                    raise ManifestError(f"missing {image_filename(kind, s + 1, c + 1, StageTag(stage, it))}")
                wave = read_wav(files[(s + 1, c + 1)], expect_channels=1)
                if wave.num_samples != truth.num_samples:
                    raise ManifestError(f"{files[(s + 1, c + 1)].name}: length differs from truth")
                grid[s, c] = wave.samples[0]
        images = SourceImageSet(grid, truth.sample_rate, Provenance.ESTIMATED, StageTag(stage, it))
        rep = metrics.report(images, truth, args.ref_channel, args.taps)
        results.append({"signal": kind, "stage": stage, "iteration": it, **rep.to_dict()})
    out_path = Path(args.out) if args.out else (man.resolve(man.metrics) if man.metrics else est_dir / "metrics.json")
    _dump_json(out_path, {
        "schema_version": 1,
        "reference_channel": args.ref_channel,
        "taps": args.taps,
        "mixture_sdr_db": metrics.mixture_sdr(mixture, truth, args.ref_channel, args.taps).tolist(),
        "results": results,
    })
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beamguide", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="render a synthetic scene and its manifest")
    p.add_argument("--spec", help="scene JSON (defaults: 2 sources, 4 mics, 4 s, 0 dB SIR)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["float32", "pcm16"], default="float32")

    for name, help_ in (("separate", "utterance-level separation"), ("stream", "frame-by-frame causal separation")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--manifest", required=True)
        p.add_argument("--estimator", choices=ESTIMATOR_CHOICES, default="oracle-signal",
                       help="stage-1 estimator")
        p.add_argument("--stage2-estimator", choices=ESTIMATOR_CHOICES, default="guided-passthrough")
        p.add_argument("--iterations", type=int, default=4)
        p.add_argument("--ref-channel", type=int, default=1)
        p.add_argument("--frame-ms", type=float, default=512.0)
        p.add_argument("--hop-ms", type=float, default=128.0)
        p.add_argument("--loading", type=float, default=1e-6)
        p.add_argument("--irm-exponent", type=float, default=2.0)
        p.add_argument("--taps", type=int, default=metrics.DEFAULT_TAPS)
        p.add_argument("--out", required=True)
        if name == "stream":
            p.add_argument("--causal", action="store_true", default=True,
                           help="accepted for clarity; streaming is always causal")

    p = sub.add_parser("eval", help="score estimate WAVs against the manifest truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--estimates", required=True)
    p.add_argument("--taps", type=int, default=metrics.DEFAULT_TAPS)
    p.add_argument("--ref-channel", type=int, default=1)
    p.add_argument("--out")
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    record = {"status": "error", "code": code, "kind": kind, "message": str(message).replace("\n", " ")}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "separate":
            return cmd_separate(args, "batch")
        if args.command == "stream":
            return cmd_separate(args, "causal")
        return cmd_eval(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except (OSError, WavFormatError, ManifestError, json.JSONDecodeError) as exc:
        return _fail(EXIT_IO, "io", exc)
    except (NumericalError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    except BeamGuideError as exc:
        return _fail(EXIT_USAGE, "config", exc)


if __name__ == "__main__":
    sys.exit(main())
