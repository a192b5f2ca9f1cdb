//! Prints the metadata of a saved model or ensemble container.

use std::path::Path;

use ristrack_core::dataio::{load_ensemble, load_model, ENSEMBLE_MAGIC, MODEL_MAGIC};
use ristrack_core::reservoir::{InitMode, ReservoirModel};

use crate::CliError;

fn describe_model(model: &ReservoirModel<f64>, indent: &str, out: &mut String) {
    let arch = model.arch();
    out.push_str(&format!("{indent}seed: {}\n", model.seed()));
    out.push_str(&format!(
        "{indent}init_mode: {}\n",
        match model.init_mode() {
            InitMode::Xavier => "xavier",
            InitMode::UniformRandom => "uniform_random",
        }
    ));
    out.push_str(&format!(
        "{indent}layers: {} x {} neurons (state width {})\n",
        arch.n_layers,
        arch.neurons_per_layer,
        arch.state_dim()
    ));
    out.push_str(&format!(
        "{indent}io: input_dim {} output_dim {} (surface elements {})\n",
        arch.input_dim,
        arch.output_dim,
        arch.n_elements()
    ));
    out.push_str(&format!(
        "{indent}connectivity: {} spectral_radius: {} (rescale: {})\n",
        arch.connectivity, arch.spectral_radius, arch.rescale_spectral_radius
    ));
    out.push_str(&format!(
        "{indent}activation: {:?} washout: {} ridge_lambda: {}\n",
        arch.activation, arch.washout, arch.ridge_lambda
    ));
    out.push_str(&format!("{indent}trained: {}\n", model.trained()));
    if let Some(stats) = model.stats() {
        out.push_str(&format!(
            "{indent}training: {} rows, validation: {} rows\n",
            stats.n_train, stats.n_validation
        ));
        out.push_str(&format!(
            "{indent}train_rmse: {:.6e} validation_rmse: {:.6e}\n",
            stats.train_rmse, stats.validation_rmse
        ));
        out.push_str(&format!(
            "{indent}actual training flops: {} additions, {} multiplications\n",
            stats.actual_additions, stats.actual_multiplications
        ));
    }
    let nnz: usize = (0..arch.n_layers).map(|l| model.w_res(l).nnz()).sum();
    out.push_str(&format!(
        "{indent}internal nonzeros: {nnz} across {} layers\n",
        arch.n_layers
    ));
}

/// Renders a human-readable summary of a container file.
pub fn inspect(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    let mut out = String::new();
    if bytes.starts_with(MODEL_MAGIC) {
        let model = load_model::<f64>(path)?;
        out.push_str(&format!("LSM-MODEL-v1 container: {}\n", path.display()));
        out.push_str(&format!("size: {} bytes, checksum ok\n", bytes.len()));
        describe_model(&model, "", &mut out);
    } else if bytes.starts_with(ENSEMBLE_MAGIC) {
        let ensemble = load_ensemble::<f64>(path)?;
        out.push_str(&format!("LSM-ENS-v1 container: {}\n", path.display()));
        out.push_str(&format!("size: {} bytes, checksum ok\n", bytes.len()));
        out.push_str(&format!("learners: {}\n", ensemble.m1()));
        let spec = ensemble.bootstrap();
        out.push_str(&format!(
            "bootstrap: block_len {} coverage {} master_seed {}\n",
            spec.block_len, spec.coverage, spec.master_seed
        ));
        let weights: Vec<String> = ensemble
            .weights()
            .iter()
            .map(|w| format!("{w:.6}"))
            .collect();
        out.push_str(&format!("weights: [{}]\n", weights.join(", ")));
        for (i, learner) in ensemble.learners().iter().enumerate() {
            out.push_str(&format!("learner {i}:\n"));
            describe_model(learner, "  ", &mut out);
        }
    } else {
        return Err(CliError::Invalid(format!(
            "{} is neither an LSM-MODEL-v1 nor an LSM-ENS-v1 container",
            path.display()
        )));
    }
    Ok(out)
}
