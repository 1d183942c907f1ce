//! Physics-informed neural modeling of a simply supported beam under a
//! moving point load.
//!
//! The library covers the whole experiment pipeline:
//!
//! - [`beam`]: problem definition, load regularizations, and the closed-form
//!   modal series solution used as ground truth.
//! - [`reference`]: an independent numerical solver (modal projection with
//!   explicit time stepping) for cross-validation.
//! - [`jet`] / [`tape`]: forward-mode input derivatives up to fourth order
//!   and reverse-mode parameter gradients over them.
//! - [`net`]: the tanh MLP surrogate, its parameter layout, and checkpoints.
//! - [`sampling`], [`optimizer`], [`train`]: collocation sampling, Adam, and
//!   the forward / inverse training loops with reproducible reports.
//! - [`field`], [`config`]: grid evaluation, CSV wire formats, and the JSON
//!   experiment configuration.
//!
//! Everything is deterministic given a seed: repeated runs produce
//! bit-identical parameters, losses, and error metrics.

pub mod beam;
pub mod config;
pub mod error;
pub mod field;
pub mod jet;
pub mod net;
pub mod optimizer;
pub mod reference;
pub mod sampling;
pub mod tape;
pub mod train;

pub use beam::{
    analytical_deflection, default_sigma, discrete_delta, gaussian_delta, generic_mode_response,
    modal_constants, mode_response, pde_residual, relative_error_percent, resonant_mode_response,
    BeamConfig, DeltaModel, ModalConstants, DEFAULT_N_TERMS, DEFAULT_RESONANCE_EPS,
};
pub use config::{load_config, ExperimentConfigFile, OutputSettings, SensorSettings, TrainSettings};
pub use error::{Error, Result};
pub use field::{
    absolute_error_field, read_field_csv, standard_grid, write_field_csv, GridField, GRID_NT,
    GRID_NX,
};
pub use jet::Jet;
pub use net::{
    backprop, forward, forward_cached, forward_with_derivs, init_params, load_checkpoint,
    save_checkpoint, Architecture, DerivBundle, MlpParams, ParamLayout, Workspace,
};
pub use optimizer::AdamState;
pub use reference::{modal_force, solve_reference, ModalSolution};
pub use sampling::{
    read_sensor_csv, sample_sensor_points, sample_training_points, SampleSet, SensorPoint,
};
pub use tape::{loss_gradient, Tape, Var};
pub use train::{
    assemble_loss, composite_loss_gradient, fit_delta_dnn, train, train_with_data, DataSource,
    LossBreakdown, RunReport, TrainConfig, TrainMode, TrainOutcome,
};
