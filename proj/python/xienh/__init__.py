"""Causal multi-branch TCN a priori SNR estimation and MMSE speech enhancement."""

from ._xienh import (
    Model,
    count_params,
    dilation_for_block,
    enhance_oracle,
    gain,
    hamming_window,
    istft,
    map_xi,
    read_wav,
    receptive_field_frames,
    run_cli,
    seg_snr,
    speech_like,
    ssnr_improvement,
    stft,
    unmap_xi,
    white_noise,
    write_wav,
)

__all__ = [
    "Model",
    "count_params",
    "dilation_for_block",
    "enhance_oracle",
    "gain",
    "hamming_window",
    "istft",
    "map_xi",
    "read_wav",
    "receptive_field_frames",
    "run_cli",
    "seg_snr",
    "speech_like",
    "ssnr_improvement",
    "stft",
    "unmap_xi",
    "white_noise",
    "write_wav",
]
