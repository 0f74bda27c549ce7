from ._core import (
    ArtifactError,
    DomainError,
    NumericError,
    ParamError,
    Predictor,
    ShapeError,
    expected_image,
    expected_in_frame_count,
    gaussian_nll,
    kl_scale,
    localization_dataset,
    normal_cdf,
    normal_inv_cdf,
    product_moments,
    regression_dataset,
    sigma_points,
    sigmoid,
    smp_leaky_relu,
    softplus,
    train_run,
    ut_propagate,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "DomainError",
    "NumericError",
    "ParamError",
    "Predictor",
    "ShapeError",
    "expected_image",
    "expected_in_frame_count",
    "gaussian_nll",
    "kl_scale",
    "localization_dataset",
    "normal_cdf",
    "normal_inv_cdf",
    "product_moments",
    "regression_dataset",
    "sigma_points",
    "sigmoid",
    "smp_leaky_relu",
    "softplus",
    "train_run",
    "ut_propagate",
]
