"""Minimal RIFF/WAVE reader and writer (PCM16 and IEEE float32, 1-8 channels)."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import WavFormatError
from .signal import MultichannelWaveform

PCM = 1
IEEE_FLOAT = 3
EXTENSIBLE = 0xFFFE
MAX_CHANNELS = 8


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        yield cid, size, body
        pos += 8 + size + (size & 1)


def read_wav(path, expect_channels: int | None = None) -> MultichannelWaveform:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavFormatError(f"{path}: truncated RIFF header ({len(data)} bytes)")
    if data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    samples = None
    for cid, size, body in _chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"{path}: truncated 'fmt ' chunk")
            fmt = struct.unpack_from("<HHIIHH", body)
            if fmt[0] == EXTENSIBLE:
                if len(body) < 26:
                    raise WavFormatError(f"{path}: truncated extensible 'fmt ' chunk")
                fmt = (struct.unpack_from("<H", body, 24)[0],) + fmt[1:]
        elif cid == b"data":
            if fmt is None:
                raise WavFormatError(f"{path}: missing 'fmt ' chunk before 'data'")
            if len(body) < size:
                raise WavFormatError(f"{path}: truncated 'data' chunk ({len(body)} of {size} bytes)")
            samples = body
            break
    if fmt is None:
        raise WavFormatError(f"{path}: missing 'fmt ' chunk")
    if samples is None:
        raise WavFormatError(f"{path}: missing 'data' chunk")
    tag, channels, rate, _, block_align, bits = fmt
    if not 1 <= channels <= MAX_CHANNELS:
        raise WavFormatError(f"{path}: {channels} channels unsupported")
    if (tag, bits) == (PCM, 16):
        arr = np.frombuffer(samples, dtype="<i2").astype(np.float64) / 32768.0
    elif (tag, bits) == (IEEE_FLOAT, 32):
        arr = np.frombuffer(samples, dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported codec (format tag {tag}, {bits} bits)")
    if arr.size % channels:
        raise WavFormatError(f"{path}: 'data' chunk is not a whole number of frames")
    if expect_channels is not None and channels != expect_channels:
        raise WavFormatError(f"{path}: expected {expect_channels} channels, found {channels}")
    return MultichannelWaveform(arr.reshape(-1, channels).T, rate)


def write_wav(path, wave: MultichannelWaveform, fmt: str = "float32") -> None:
    """Write interleaved samples; ``fmt`` is ``"float32"`` or ``"pcm16"``."""
    x = wave.samples
    channels = x.shape[0]
    if not 1 <= channels <= MAX_CHANNELS:
        raise WavFormatError(f"{channels} channels unsupported")
    if fmt == "float32":
        tag, bits = IEEE_FLOAT, 32
        payload = np.ascontiguousarray(x.T, dtype="<f4").tobytes()
    elif fmt == "pcm16":
        tag, bits = PCM, 16
        ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        payload = np.ascontiguousarray(ints.T).tobytes()
    else:
        raise WavFormatError(f"unsupported output format {fmt!r}")
    block = channels * bits // 8
    header = struct.pack("<4sI4s", b"RIFF", 4 + 8 + 16 + 8 + len(payload) + (len(payload) & 1), b"WAVE")
    fmt_chunk = struct.pack("<4sIHHIIHH", b"fmt ", 16, tag, channels, int(wave.sample_rate),
                            int(wave.sample_rate) * block, block, bits)
    data_chunk = struct.pack("<4sI", b"data", len(payload)) + payload + (b"\0" if len(payload) & 1 else b"")
    Path(path).write_bytes(header + fmt_chunk + data_chunk)
