from .errors import (
    RFShakeError,
    ArgumentError,
    DimensionError,
    DegenerateBatchError,
    EmptyLossError,
    ClippedReceptiveFieldError,
    NoSolutionError,
    ContractError,
    UndefinedClassError,
    MetricError,
    ContainerFormatError,
    ConfigError,
    TrainingDivergedError,
)
from .architectures import (
    ArchSpec,
    BlockSpec,
    ModelState,
    build_cp_resnet,
    build_spec,
    build_ss_resnet,
    build_vgg,
    instantiate,
)
from .rf_analysis import (
    LayerTrace,
    RFReport,
    compute_rf,
    empirical_rf,
    inverse_rho,
    rf_table,
)
from .shake_shake import ShakeCoefficients, sample_coefficients, shake_combine
from .metrics import (
    MetricsReport,
    PredictionSet,
    average_precision,
    evaluate_predictions,
    f1_classical,
    f1_posneg,
    macro_pr_auc,
)
from .training import (
    TrainConfig,
    TrainReport,
    adam_step,
    evaluate,
    load_checkpoint,
    mixup_batch,
    save_checkpoint,
    train,
)
from .experiment import ExperimentConfig, run_experiment, run_sweep
