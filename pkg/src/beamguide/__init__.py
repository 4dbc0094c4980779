"""Iterative MVDR-guided multichannel source separation."""
from .errors import (BeamGuideError, ConfigError, DegenerateSignalError, DimensionError,
                     EstimatorError, ManifestError, NumericalError, WavFormatError)
from .estimators import EstimatorKind, EstimatorSpec, estimate
from .metrics import bsseval_sdr, report, snr
from .mvdr import beamform_apply, causal_mvdr_frame, mimmo_beamform, souden_weights
from .permute import batch_align, causal_align_frame
from .pipeline import CausalSession, PipelineConfig, run, run_causal_stream, run_iterative, run_stage
from .scm import ScmField, batch_scms, causal_scm_update
from .signal import MultichannelWaveform, Provenance, SourceImageSet, StageTag, mix_images, residual
from .stft import ComplexSpectrogram, StftConfig, analyze, synthesize

__version__ = "0.1.0"
