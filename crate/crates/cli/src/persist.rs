//! Dataset and model files in the [`container`](crate::container) format.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use oplab_core::numerics::DenseMatrix;
use oplab_core::opfit::{
    AdmissibleBlock, BandedKernel, DenseKernel, DenseLeaf, FourierMultiplier, HierarchicalKernel, KernelModel,
    LowRankKernel,
};
use oplab_core::pdelab::{OperatorDataset, Provenance};
use oplab_core::sample::{FunctionSample, Grid};
use serde::{Deserialize, Serialize};

use crate::container::{decode, encode, ContainerError, PayloadReader};
use crate::error::CliError;

pub const DATASET_KIND: &str = "dataset";
pub const MODEL_KIND: &str = "model";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetMeta {
    provenance: Provenance,
    grid: Grid,
    pairs: usize,
    values_per_sample: usize,
}

/// Payload: every input sample, then every output sample, each in grid order.
pub fn encode_dataset(ds: &OperatorDataset) -> Result<Vec<u8>, ContainerError> {
    let grid = ds.grid();
    let meta = DatasetMeta {
        provenance: ds.provenance.clone(),
        values_per_sample: grid.len(),
        grid,
        pairs: ds.len(),
    };
    let payload: Vec<f64> = ds
        .inputs
        .iter()
        .chain(&ds.outputs)
        .flat_map(|f| f.values.iter().copied())
        .collect();
    encode(DATASET_KIND, &meta, &payload)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<OperatorDataset, ContainerError> {
    let decoded = decode(bytes, DATASET_KIND)?;
    let meta: DatasetMeta =
        serde_json::from_value(decoded.meta).map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    if meta.values_per_sample != meta.grid.len() {
        return Err(ContainerError::MalformedHeader(format!(
            "{} values per sample on a grid of {} nodes",
            meta.values_per_sample,
            meta.grid.len()
        )));
    }
    let mut reader = PayloadReader::new(&decoded.payload);
    let mut read_samples = |count: usize| -> Result<Vec<FunctionSample>, ContainerError> {
        (0..count)
            .map(|_| {
                Ok(FunctionSample {
                    grid: meta.grid.clone(),
                    values: reader.take(meta.values_per_sample)?.to_vec(),
                })
            })
            .collect()
    };
    let inputs = read_samples(meta.pairs)?;
    let outputs = read_samples(meta.pairs)?;
    reader.finish()?;
    let ds = OperatorDataset {
        inputs,
        outputs,
        provenance: meta.provenance,
    };
    ds.validate()
        .map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
enum ModelMeta {
    DenseKernel {
        grid: Grid,
    },
    LowRank {
        grid: Grid,
        rank: usize,
    },
    FourierMultiplier {
        length: f64,
        training_resolution: usize,
        k_max: usize,
        unexcited: Vec<usize>,
    },
    Banded {
        grid: Grid,
        radius: f64,
        truncation_error: f64,
    },
    Hierarchical {
        grid: Grid,
        levels: usize,
        rank: usize,
        blocks: Vec<BlockMeta>,
        leaves: Vec<LeafMeta>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockMeta {
    level: usize,
    row_start: usize,
    col_start: usize,
    size: usize,
    rank: usize,
    tail: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeafMeta {
    row_start: usize,
    col_start: usize,
    size: usize,
}

/// Payload layout per variant (all matrices row-major):
/// dense `G`; low-rank `left` then `right`; multiplier `(re, im)` pairs for
/// modes `−k_max..=k_max`; banded `G_r`; hierarchical each block's `left`
/// and `right` in block order, then each leaf.
pub fn encode_model(model: &KernelModel) -> Result<Vec<u8>, ContainerError> {
    let mut payload = Vec::new();
    let meta = match model {
        KernelModel::Dense(k) => {
            payload.extend_from_slice(k.kernel.as_slice());
            ModelMeta::DenseKernel { grid: k.grid.clone() }
        }
        KernelModel::LowRank(k) => {
            payload.extend_from_slice(k.left.as_slice());
            payload.extend_from_slice(k.right.as_slice());
            ModelMeta::LowRank {
                grid: k.grid.clone(),
                rank: k.left.cols(),
            }
        }
        KernelModel::FourierMultiplier(fm) => {
            payload.extend(fm.multiplier.iter().flat_map(|z| [z.re, z.im]));
            ModelMeta::FourierMultiplier {
                length: fm.length,
                training_resolution: fm.training_resolution,
                k_max: fm.k_max,
                unexcited: fm.unexcited.clone(),
            }
        }
        KernelModel::Banded(k) => {
            payload.extend_from_slice(k.kernel.as_slice());
            ModelMeta::Banded {
                grid: k.grid.clone(),
                radius: k.radius,
                truncation_error: k.truncation_error,
            }
        }
        KernelModel::Hierarchical(h) => {
            for b in &h.blocks {
                payload.extend_from_slice(b.left.as_slice());
                payload.extend_from_slice(b.right.as_slice());
            }
            for leaf in &h.leaves {
                payload.extend_from_slice(leaf.block.as_slice());
            }
            ModelMeta::Hierarchical {
                grid: h.grid.clone(),
                levels: h.levels,
                rank: h.rank,
                blocks: h
                    .blocks
                    .iter()
                    .map(|b| BlockMeta {
                        level: b.level,
                        row_start: b.row_start,
                        col_start: b.col_start,
                        size: b.size,
                        rank: b.left.cols(),
                        tail: b.tail,
                    })
                    .collect(),
                leaves: h
                    .leaves
                    .iter()
                    .map(|l| LeafMeta {
                        row_start: l.row_start,
                        col_start: l.col_start,
                        size: l.block.rows(),
                    })
                    .collect(),
            }
        }
    };
    encode(MODEL_KIND, &meta, &payload)
}

fn matrix(reader: &mut PayloadReader, rows: usize, cols: usize) -> Result<DenseMatrix<f64>, ContainerError> {
    let values = reader.take(rows * cols)?.to_vec();
    DenseMatrix::from_row_major(rows, cols, values).map_err(|e| ContainerError::MalformedHeader(e.to_string()))
}

pub fn decode_model(bytes: &[u8]) -> Result<KernelModel, ContainerError> {
    let decoded = decode(bytes, MODEL_KIND)?;
    let meta: ModelMeta =
        serde_json::from_value(decoded.meta).map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    let mut reader = PayloadReader::new(&decoded.payload);
    let model = match meta {
        ModelMeta::DenseKernel { grid } => {
            let m = grid.len();
            KernelModel::Dense(DenseKernel {
                kernel: matrix(&mut reader, m, m)?,
                grid,
            })
        }
        ModelMeta::LowRank { grid, rank } => {
            let m = grid.len();
            KernelModel::LowRank(LowRankKernel {
                left: matrix(&mut reader, m, rank)?,
                right: matrix(&mut reader, m, rank)?,
                grid,
            })
        }
        ModelMeta::FourierMultiplier {
            length,
            training_resolution,
            k_max,
            unexcited,
        } => {
            let pairs = reader.take(2 * (2 * k_max + 1))?;
            KernelModel::FourierMultiplier(FourierMultiplier {
                length,
                training_resolution,
                k_max,
                multiplier: pairs.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
                unexcited,
            })
        }
        ModelMeta::Banded {
            grid,
            radius,
            truncation_error,
        } => {
            let m = grid.len();
            KernelModel::Banded(BandedKernel {
                kernel: matrix(&mut reader, m, m)?,
                grid,
                radius,
                truncation_error,
            })
        }
        ModelMeta::Hierarchical {
            grid,
            levels,
            rank,
            blocks,
            leaves,
        } => {
            let blocks = blocks
                .into_iter()
                .map(|b| {
                    Ok(AdmissibleBlock {
                        left: matrix(&mut reader, b.size, b.rank)?,
                        right: matrix(&mut reader, b.size, b.rank)?,
                        level: b.level,
                        row_start: b.row_start,
                        col_start: b.col_start,
                        size: b.size,
                        tail: b.tail,
                    })
                })
                .collect::<Result<Vec<_>, ContainerError>>()?;
            let leaves = leaves
                .into_iter()
                .map(|l| {
                    Ok(DenseLeaf {
                        block: matrix(&mut reader, l.size, l.size)?,
                        row_start: l.row_start,
                        col_start: l.col_start,
                    })
                })
                .collect::<Result<Vec<_>, ContainerError>>()?;
            KernelModel::Hierarchical(HierarchicalKernel {
                grid,
                levels,
                rank,
                blocks,
                leaves,
            })
        }
    };
    reader.finish()?;
    Ok(model)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn container_error(path: &Path) -> impl FnOnce(ContainerError) -> CliError + '_ {
    move |source| CliError::Container {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_dataset(path: &Path, ds: &OperatorDataset) -> Result<(), CliError> {
    write_bytes(path, &encode_dataset(ds).map_err(container_error(path))?)
}

pub fn load_dataset(path: &Path) -> Result<OperatorDataset, CliError> {
    decode_dataset(&read_bytes(path)?).map_err(container_error(path))
}

pub fn save_model(path: &Path, model: &KernelModel) -> Result<(), CliError> {
    write_bytes(path, &encode_model(model).map_err(container_error(path))?)
}

pub fn load_model(path: &Path) -> Result<KernelModel, CliError> {
    decode_model(&read_bytes(path)?).map_err(container_error(path))
}
