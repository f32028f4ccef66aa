"""Active k-space line sampling for sequential disease detection and severity grading."""

from .kspace import (
    CartesianMask,
    UndersampledKSpace,
    add_line,
    apply_mask,
    dft2,
    idft2,
    init_random_mask,
    zero_fill_magnitude,
)
from .phantom import DatasetManifest, GeneratorConfig, Subject, generate_dataset, generate_subject, read_subject, write_subject
from .classifiers import (
    ClassifierConfig,
    MlpParams,
    Prediction,
    extract_input,
    feature_map,
    finetune_severity,
    mlp_backward,
    mlp_forward,
    train_disease,
    weighted_ce,
)
from .rewards import (
    RewardSchedule,
    StepReward,
    ce_improvement,
    combined_step_reward,
    cosine_weights,
    ssim,
    three_class_f1_reward,
)
from .policy import (
    AcquisitionState,
    EpisodeTrace,
    PolicyBundle,
    PolicyConfig,
    PolicyParams,
    evaluate_candidates,
    greedy_topq,
    policy_forward,
    reinforce_grad_step,
    run_inference_episode,
    run_training_episode,
    train_policy,
)
from .variants import DualPolicyParams, random_policy_step, train_varying_parameter, varying_parameter_forward
from .metrics import balanced_accuracy, macro_f1, pearson_corr, roc_auc, sequential_accuracy
from .evaluation import per_step_curves, trajectory_heatmap

__version__ = "0.1.0"
