//! Model checkpoints and fitted EEG reducers on disk.
//!
//! A checkpoint is a directory holding `header.json` (topology, condition,
//! alphabet, feature standardisation) and one `MTNS` file per parameter.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Condition;
use super::features::{EegReducer, Standardizer};
use super::tensorfile::TensorFile;
use crate::ctc::Alphabet;
use crate::kpca::{KernelParams, KpcaModel};
use crate::nn::{ModelConfig, ModelGraph, Tensor};
use crate::{Error, Result};

const CHECKPOINT_FORMAT: &str = "eegvsr-checkpoint";
const REDUCER_FORMAT: &str = "eegvsr-eeg-reducer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub condition: Condition,
    pub model: ModelConfig,
    /// Printable symbols in class order (blank excluded).
    pub alphabet: String,
    pub side_standardizer: Option<Standardizer>,
    pub params: Vec<ParamEntry>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn save_checkpoint(dir: &Path, model: &ModelGraph, condition: Condition, side: Option<&Standardizer>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut params = Vec::new();
    for p in model.params() {
        let file = format!("{}.mtns", p.name);
        TensorFile::from_tensor(&p.value)?.write(&dir.join(&file))?;
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            file,
        });
    }
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        condition,
        model: model.config().clone(),
        alphabet: Alphabet::default().characters().iter().collect(),
        side_standardizer: side.cloned(),
        params,
    };
    write_json(&dir.join("header.json"), &header)
}

pub fn load_checkpoint(dir: &Path) -> Result<(ModelGraph, CheckpointHeader)> {
    let header: CheckpointHeader = read_json(&dir.join("header.json"))?;
    if header.format != CHECKPOINT_FORMAT || header.version != 1 {
        return Err(Error::Format(format!("{} is not a version 1 checkpoint", dir.display())));
    }
    let expected: String = Alphabet::default().characters().iter().collect();
    if header.alphabet != expected {
        return Err(Error::Config(format!(
            "checkpoint alphabet {:?} does not match the decoder alphabet {expected:?}",
            header.alphabet
        )));
    }
    let mut values = Vec::with_capacity(header.params.len());
    for p in &header.params {
        let t = TensorFile::read(&dir.join(&p.file))?.to_tensor()?;
        if t.shape() != p.shape.as_slice() {
            return Err(Error::Format(format!("{} has shape {:?}, header says {:?}", p.file, t.shape(), p.shape)));
        }
        values.push((p.name.clone(), t));
    }
    let mut model = ModelGraph::new(header.model.clone())?;
    model.load_params(&values)?;
    Ok((model, header))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReducerHeader {
    format: String,
    version: u32,
    kernel: KernelParams,
    dim: usize,
    n_train: usize,
    n_components: usize,
    eigenvalues: Vec<f64>,
    spectrum: Vec<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
    standardizer: Standardizer,
}

/// Header JSON plus `training_points.mtns` and `alphas.mtns`. Tensors are
/// stored at f32, so a reloaded reducer matches the original to about 1e-6.
pub fn save_reducer(dir: &Path, r: &EegReducer) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let k = &r.kpca;
    let header = ReducerHeader {
        format: REDUCER_FORMAT.into(),
        version: 1,
        kernel: k.kernel,
        dim: k.dim,
        n_train: k.n_train,
        n_components: k.n_components,
        eigenvalues: k.eigenvalues.clone(),
        spectrum: k.spectrum.clone(),
        row_means: k.row_means.clone(),
        grand_mean: k.grand_mean,
        standardizer: r.standardizer.clone(),
    };
    write_json(&dir.join("header.json"), &header)?;
    TensorFile::from_tensor(&Tensor::from_vec(&[k.n_train, k.dim], k.training_points.clone())?)?
        .write(&dir.join("training_points.mtns"))?;
    TensorFile::from_tensor(&Tensor::from_vec(&[k.n_train, k.n_components], k.alphas.clone())?)?.write(&dir.join("alphas.mtns"))
}

pub fn load_reducer(dir: &Path) -> Result<EegReducer> {
    let h: ReducerHeader = read_json(&dir.join("header.json"))?;
    if h.format != REDUCER_FORMAT || h.version != 1 {
        return Err(Error::Format(format!("{} is not a version 1 EEG reducer", dir.display())));
    }
    let points = TensorFile::read(&dir.join("training_points.mtns"))?.to_tensor()?;
    let alphas = TensorFile::read(&dir.join("alphas.mtns"))?.to_tensor()?;
    if points.shape() != [h.n_train, h.dim] || alphas.shape() != [h.n_train, h.n_components] {
        return Err(Error::Format(format!("{}: tensor shapes disagree with the header", dir.display())));
    }
    Ok(EegReducer {
        standardizer: h.standardizer,
        kpca: KpcaModel {
            kernel: h.kernel,
            dim: h.dim,
            training_points: points.into_data(),
            n_train: h.n_train,
            alphas: alphas.into_data(),
            n_components: h.n_components,
            eigenvalues: h.eigenvalues,
            spectrum: h.spectrum,
            row_means: h.row_means,
            grand_mean: h.grand_mean,
        },
    })
}
