from ._selfir import (
    add_gaussian,
    add_poisson,
    add_sensor,
    evaluate,
    load_image,
    process,
    psnr,
    sample_isp,
    sample_sensor_params,
    save_image,
    sharp_mask,
    ssim,
    ssim_tiled,
    subsample,
    synth_dataset,
    toy_train_config,
    train,
    unprocess,
)

__all__ = [
    "add_gaussian",
    "add_poisson",
    "add_sensor",
    "evaluate",
    "load_image",
    "process",
    "psnr",
    "sample_isp",
    "sample_sensor_params",
    "save_image",
    "sharp_mask",
    "ssim",
    "ssim_tiled",
    "subsample",
    "synth_dataset",
    "toy_train_config",
    "train",
    "unprocess",
]
