"""foagen: directional first-order-Ambisonics audio generation.

Conditioned flow matching over complex FOA spectrograms, an image-source
room-simulation baseline, and objective spatial/class evaluation, all sized
to run on a single CPU core.
"""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .conditioning import (Condition, ConditionVector, EncoderParams,
                           drop_condition, encode_condition,
                           encode_condition_batch, init_encoder, null_condition)
from .config import RunConfig, parse_room_dims, resolve_config
from .dataset import (DatasetManifest, ManifestEntry, SynthClassSpec,
                      build_dataset, default_classes, load_manifest, synth_mono)
from .flow import (InterpolantSchedule, SamplerConfig, cfg_velocity,
                   integrate_ode, interpolate, sample, sample_batch,
                   velocity_target)
from .foa import FoaWaveform, encode_foa, foa_gains
from .geometry import (Direction, SphereGrid, angular_distance,
                       dir_to_unit_vector, fibonacci_grid, unit_vector_to_dir)
from .metrics import (ClassifierOracle, DoaEstimate, EmbeddingStats,
                      EvalReport, LogMelEmbedder, NoSignalError,
                      class_accuracy, doa_error, estimate_doa, eval_report,
                      frechet_distance, kl_divergence, sqrtm_product)
from .model import ModelConfig, forward, init_params, param_count
from .room import (ArraySpec, RirSet, RoomSpec, a_to_b, cardioid,
                   image_source_rir, plane_wave_a_format, rir_set,
                   simulate_baseline)
from .stft import (FoaSpectrogram, StftConfig, istft, spec_to_waveform, stft,
                   stft_preset, waveform_to_spec)
from .train import Adam, flow_matching_loss, sigma_data_of, train_epochs
from .wavio import read_wav, write_wav

__version__ = "0.1.0"

__all__ = [
    "Adam", "ArraySpec", "Checkpoint", "CheckpointError", "ClassifierOracle",
    "Condition", "ConditionVector", "DatasetManifest", "Direction",
    "DoaEstimate", "EmbeddingStats", "EncoderParams", "EvalReport",
    "FoaSpectrogram", "FoaWaveform", "InterpolantSchedule", "LogMelEmbedder",
    "ManifestEntry", "ModelConfig", "NoSignalError", "RirSet", "RoomSpec",
    "RunConfig", "SamplerConfig", "SphereGrid", "StftConfig", "SynthClassSpec",
    "a_to_b", "angular_distance", "build_dataset", "cardioid", "cfg_velocity",
    "class_accuracy", "default_classes", "dir_to_unit_vector", "doa_error",
    "drop_condition", "encode_condition", "encode_condition_batch",
    "encode_foa", "estimate_doa", "eval_report", "fibonacci_grid",
    "flow_matching_loss", "foa_gains", "forward", "frechet_distance",
    "image_source_rir", "init_encoder", "init_params", "integrate_ode",
    "interpolate", "istft", "kl_divergence", "load_checkpoint",
    "load_manifest", "null_condition", "param_count", "plane_wave_a_format",
    "read_wav", "resolve_config", "rir_set", "sample", "sample_batch",
    "save_checkpoint", "sigma_data_of", "simulate_baseline", "spec_to_waveform",
    "sqrtm_product", "stft", "stft_preset", "synth_mono", "train_epochs",
    "unit_vector_to_dir", "velocity_target", "waveform_to_spec", "write_wav",
    "parse_room_dims",
]
