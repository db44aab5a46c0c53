"""Physics-informed mixture density networks with analytic oracles and a
conditional flow matching baseline."""

from .autodiff import Tape, Var, apply, backward, lift
from .cfm import CfmModel, bridge, cfm_loss, cfm_param_count, cfm_sample, init_cfm, train_cfm
from .data import Dataset, load_csv, save_csv
from .losses import (
    Batch,
    ClassMap,
    ResidualSpec,
    class_nll,
    collocation_points,
    input_derivative,
    nll,
    physics_loss,
    total_loss,
)
from .mdn import (
    Architecture,
    MdnModel,
    MixtureParams,
    fit_standardization,
    init_params,
    log_pdf,
    mdn_forward,
    mean,
    param_count,
    pdf,
    sample,
    sample_n,
    second_moment,
)
from .optim import AdamState, TrainConfig, TrainLog, adam_init, adam_step, train
from .problems import (
    BifurcationSample,
    ChafeeProfile,
    DensityCurve,
    HugoniotRecord,
    SdeTrajectory,
    bifurcation_roots,
    gen_bifurcation,
    gen_chafee_dataset,
    gen_circle,
    gen_hugoniot_surrogate,
    gen_sde_dataset,
    load_hugoniot,
    simulate_sde,
    solve_chafee,
    stationary_density,
    stationary_density_generic,
)

__version__ = "0.1.0"
