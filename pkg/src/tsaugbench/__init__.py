"""Augmentation benchmark harness for multivariate time-series classification.

Submodules:
    core     series/dataset model and seeded randomness streams
    tsfile   .ts format reader/writer and missing-value imputation
    metrics  dataset characterisation and relative gain
    augment  augmentation operators and balance-to-parity
    rocket   random-kernel features and the ridge classification head
    bench    experiment sweep, reporting, stratified splitting
"""

from .augment import (
    AugmenterSpec,
    balance_dataset,
    calibrate_noise_level,
    freq_mask,
    gaussian_cov_synthesize,
    inject_noise,
    parse_augmenter,
    permute_segments,
    rotate,
    scale,
    slice_resize,
    smote_synthesize,
    time_mask,
    window_warp,
)
from .bench import (
    DatasetPair,
    ExperimentConfig,
    ExperimentReport,
    report_table,
    run_experiment,
    split_stratified,
)
from .core import LabeledDataset, RngStream, Series, SynthesisRecord, class_counts, flatten, per_channel_std, unflatten
from .metrics import (
    DatasetProfile,
    GainRecord,
    dataset_variance,
    hellinger,
    imbalance_degree,
    missing_proportion,
    profile,
    relative_gain,
    train_test_distance,
)
from .rocket import (
    KernelBank,
    RidgeModel,
    accuracy,
    apply_kernel,
    generate_kernels,
    ridge_fit,
    ridge_predict,
    transform,
)
from .tsfile import ImputePolicy, TsHeader, impute, parse_ts, read_ts_file, write_ts, write_ts_file

__version__ = "0.1.0"
