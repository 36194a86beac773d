# __init__.py

"""
Dirichlet Wrapper (dw)

Estimates the uncertainty of a black-box classifier that only exposes
probability vectors. A small regressor learns, per input, how concentrated a
Dirichlet distribution around the black-box output should be; sampling from it
gives uncertainty scores that are used to reject the least reliable
predictions.

Modules:
    - numerics: Gamma quantiles, Dirichlet sampling and the sample derivative.
    - nnet: Dense networks with forward/backward passes and Adam.
    - wrapper: The Dirichlet wrapper, its loss and training.
    - uncertainty: Baseline entropy, sampled entropy and variation ratio.
    - rejection: Reject-fraction sweeps and the NRA/CQ/RQ measures.
    - blackbox: Simulated, file-backed and remote black-box sources.
    - corpus: Datasets, featurization and the synthetic shift scenario.
    - report: Curves CSV, SVG panels and the summary table.
    - cli / commands / main: The ``dw`` command line.
    - config / logger / console_manager / errors / utils: Shared infrastructure.

Usage:
    ```python
    from dirichlet_wrapper import (
        TrainConfig,
        WrapperDataset,
        train_wrapper,
        enrich_batch,
        score_dataset,
        sweep_curve,
    )
    ```

License:
    MIT License
"""

from .blackbox import (
    SimulatedBlackBox,
    RemoteBlackBox,
    FileBlackBox,
    batch_predict,
    predict,
    train_simulated_blackbox,
)
from .cli import parse_arguments
from .config import (
    load_config,
    merge_args_into_config,
    validate_config,
    regenerate_default_config,
)
from .corpus import ShiftScenario, generate_shift_scenario, load_dataset
from .logger import setup_logging
from .numerics import dirichlet_sample, gamma_quantile, reg_inc_gamma_p, uniform_noise
from .rejection import partition, sweep_curve
from .uncertainty import baseline_entropy, sampled_entropy, score_dataset, variation_ratio
from .wrapper import TrainConfig, WrapperDataset, enrich, enrich_batch, train_wrapper

__all__ = [
    "SimulatedBlackBox",
    "RemoteBlackBox",
    "FileBlackBox",
    "batch_predict",
    "predict",
    "train_simulated_blackbox",
    "parse_arguments",
    "load_config",
    "merge_args_into_config",
    "validate_config",
    "regenerate_default_config",
    "ShiftScenario",
    "generate_shift_scenario",
    "load_dataset",
    "setup_logging",
    "dirichlet_sample",
    "gamma_quantile",
    "reg_inc_gamma_p",
    "uniform_noise",
    "partition",
    "sweep_curve",
    "baseline_entropy",
    "sampled_entropy",
    "score_dataset",
    "variation_ratio",
    "TrainConfig",
    "WrapperDataset",
    "enrich",
    "enrich_batch",
    "train_wrapper",
]
