"""JSON manifest describing one utterance: mixture, truth images and external estimates.

Schema (version 1), paths relative to the manifest file::

    {
      "schema_version": 1,
      "sample_rate": 8000,
      "num_sources": 2,
      "num_channels": 4,
      "mixture": "mixture.wav",
      "truth": [["truth_s1c1.wav", ...], ...],           # optional, S x C mono files
      "estimates": {"stage1_iter0": [[...], ...], ...},   # optional, S x C mono files
      "rirs": [[...], ...],                               # optional, informational
      "metrics": "metrics.json"                           # optional output path
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError
from .signal import MultichannelWaveform, Provenance, SourceImageSet, StageTag
from .wavio import read_wav

SCHEMA_VERSION = 1


@dataclass
class Manifest:
    mixture: str
    sample_rate: int
    num_sources: int
    num_channels: int
    truth: list | None = None
    estimates: dict = field(default_factory=dict)
    rirs: list | None = None
    metrics: str | None = None
    base_dir: Path = field(default_factory=Path)

    def resolve(self, rel) -> Path:
        return self.base_dir / rel

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "sample_rate": self.sample_rate,
            "num_sources": self.num_sources,
            "num_channels": self.num_channels,
            "mixture": self.mixture,
        }
        for key in ("truth", "rirs", "metrics"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.estimates:
            out["estimates"] = self.estimates
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def load_mixture(self) -> MultichannelWaveform:
        wave = read_wav(self.resolve(self.mixture), expect_channels=self.num_channels)
        self._check_rate(wave, self.mixture)
        return wave

    def _check_rate(self, wave, name):
        if wave.sample_rate != self.sample_rate:
            raise ManifestError(f"{name}: sample rate {wave.sample_rate}, manifest says {self.sample_rate}")

    def _load_grid(self, grid, what, provenance, tag=None) -> SourceImageSet:
        if len(grid) != self.num_sources or any(len(row) != self.num_channels for row in grid):
            raise ManifestError(f"{what} must list {self.num_sources} x {self.num_channels} files")
        rows = []
        for row in grid:
            chans = []
            for rel in row:
                wave = read_wav(self.resolve(rel), expect_channels=1)
                self._check_rate(wave, rel)
                chans.append(wave.samples[0])
            lengths = {c.size for c in chans}
            if len(lengths) != 1:
                raise ManifestError(f"{what}: channel files differ in length")
            rows.append(np.stack(chans))
        if len({r.shape for r in rows}) != 1:
            raise ManifestError(f"{what}: source files differ in length")
        return SourceImageSet(np.stack(rows), self.sample_rate, provenance, tag or StageTag())

    def load_truth(self) -> SourceImageSet:
        if self.truth is None:
            raise ManifestError("manifest lists no truth images")
        return self._load_grid(self.truth, "truth", Provenance.TRUTH)

    def load_estimates(self) -> dict[str, SourceImageSet]:
        """Eagerly read every external estimate entry, keyed ``stage{K}_iter{N}``."""
        out = {}
        for key, grid in sorted(self.estimates.items()):
            tag = StageTag.from_key(key)
            out[tag.key] = self._load_grid(grid, f"estimates[{key}]", Provenance.ESTIMATED, tag)
        return out


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ManifestError(f"{path}: unsupported schema_version {version!r}")
    missing = [k for k in ("mixture", "sample_rate", "num_sources", "num_channels") if k not in raw]
    if missing:
        raise ManifestError(f"{path}: missing fields {missing}")
    man = Manifest(
        mixture=raw["mixture"],
        sample_rate=int(raw["sample_rate"]),
        num_sources=int(raw["num_sources"]),
        num_channels=int(raw["num_channels"]),
        truth=raw.get("truth"),
        estimates=raw.get("estimates", {}),
        rirs=raw.get("rirs"),
        metrics=raw.get("metrics"),
        base_dir=path.parent,
    )
    for rel in [man.mixture] + [p for grid in ([man.truth or []] + list(man.estimates.values()))
                                for row in grid for p in row]:
        if not man.resolve(rel).is_file():
            raise ManifestError(f"{path}: referenced file {rel} does not exist")
    return man


def image_filename(kind: str, source: int, channel: int, tag: StageTag) -> str:
    """``xhat_s{S}_c{C}_stage{K}_iter{N}.wav`` with 1-based source and channel."""
    return f"{kind}_s{source}_c{channel}_stage{tag.stage}_iter{tag.iteration}.wav"


def truth_filename(source: int, channel: int) -> str:
    return f"truth_s{source}c{channel}.wav"
