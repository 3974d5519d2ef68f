use std::path::{Path, PathBuf};
use std::time::Instant;

use oplab_core::numerics::{DenseMatrix, RngStream};
use oplab_core::opfit::{
    compute_loss, evaluate_super_resolution, fit_fourier_multiplier, fit_green_kernel, hierarchical_decompose,
    low_rank_truncate, predict_dataset, truncate_band, DenseKernel, KernelModel, LossKind,
};
use oplab_core::pdelab::{make_dataset, solve_poisson_1d, DatasetRequest, OperatorDataset};
use oplab_core::recovery::{
    hodlr_query_budget, randomized_svd, recover_banded, recover_circulant, recover_hodlr, RecoveryReport,
};
use oplab_core::sample::{FunctionSample, Grid};
use oplab_core::structured::{random_structured, FnOperator, LinearOperator, MatvecOracle, StructureSpec};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, OperatorSource, RecoverInstance, VariantConfig};
use crate::error::CliError;
use crate::persist::{load_dataset, load_model, save_dataset, save_model, write_bytes};

/// Command-line overrides shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Context {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    fn seed(&self, config: &ExperimentConfig) -> u64 {
        self.seed.unwrap_or(config.seed)
    }
}

fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("config has no [{name}] section")))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn generate(config: &ExperimentConfig, ctx: &Context) -> Result<Vec<String>, CliError> {
    let g = section(&config.generate, "generate")?;
    let base = ctx.seed(config);
    let mut lines = Vec::new();
    for entry in &g.datasets {
        let started = Instant::now();
        let seed = base.wrapping_add(entry.seed_offset);
        let request = DatasetRequest {
            pde: g.pde,
            covariance: g.covariance.spec(),
            pairs: entry.pairs,
            resolution: entry.resolution,
            max_modes: g.max_modes,
        };
        log::info!(
            "generating {} pairs at s = {} with seed {seed}",
            entry.pairs,
            entry.resolution
        );
        let ds = make_dataset(&request, &RngStream::new(seed))?;
        let path = ctx.resolve(&entry.output);
        save_dataset(&path, &ds)?;
        lines.push(format!(
            "generate: wrote {} (pde {}, M = {}, s = {}, seed = {}, {:.3} s)",
            path.display(),
            g.pde.name(),
            ds.len(),
            entry.resolution,
            seed,
            started.elapsed().as_secs_f64()
        ));
    }
    Ok(lines)
}

fn columns_of(op: &dyn LinearOperator<f64>) -> DenseMatrix<f64> {
    let n = op.dim();
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            op.apply(&e)
        })
        .collect();
    DenseMatrix::from_columns(n, &columns)
}

fn poisson_operator(n: usize) -> Result<FnOperator<f64>, CliError> {
    if n < 3 {
        return Err(CliError::Config(format!("poisson1d operator needs n >= 3, got {n}")));
    }
    let solve = move |x: &[f64]| -> Vec<f64> {
        let f = FunctionSample::new(Grid::unit_interval(n), x.to_vec()).expect("dimension checked by the oracle");
        solve_poisson_1d(&f).expect("unit-interval grid").values
    };
    // The discrete solution operator is symmetric, so it is its own transpose.
    Ok(FnOperator::new(n, solve, solve))
}

fn report_json<R: LinearOperator<f64>>(report: RecoveryReport<R>, reference: &DenseMatrix<f64>) -> Value {
    let report = report.with_reference(reference);
    json!({
        "forward_queries": report.forward_queries,
        "transpose_queries": report.transpose_queries,
        "total_queries": report.total_queries(),
        "residual_frobenius_relative": report.residual_frobenius_relative,
    })
}

pub fn recover(config: &ExperimentConfig, ctx: &Context) -> Result<Vec<String>, CliError> {
    let r = section(&config.recover, "recover")?;
    let seed = ctx.seed(config);
    let n = r.instance.n();
    let mut stream = RngStream::new(seed);
    let started = Instant::now();
    let operator: Box<dyn LinearOperator<f64> + Send + Sync> = match r.operator {
        OperatorSource::Poisson1d => {
            if matches!(r.instance, RecoverInstance::Circulant { .. }) {
                return Err(CliError::Config(
                    "the poisson1d operator is not circulant; use operator = \"random\"".into(),
                ));
            }
            Box::new(poisson_operator(n)?)
        }
        OperatorSource::Random => {
            let spec = match r.instance {
                RecoverInstance::LowRank { rank, .. } => StructureSpec::LowRank { rank },
                RecoverInstance::Circulant { .. } => StructureSpec::Circulant,
                RecoverInstance::Banded { bandwidth, .. } => StructureSpec::Banded { bandwidth },
                RecoverInstance::Hodlr { rank, levels, .. } => StructureSpec::Hodlr { levels, rank },
            };
            Box::new(random_structured::<f64>(spec, n, &mut stream)?)
        }
    };
    log::info!("recovering {:?} (n = {n}) from a {:?} operator", r.instance, r.operator);
    let reference = columns_of(operator.as_ref());
    let oracle = MatvecOracle::from_arc(std::sync::Arc::from(operator as Box<dyn LinearOperator<f64>>));
    let (outcome, budget) = match r.instance {
        RecoverInstance::LowRank { rank, oversampling, .. } => (
            report_json(randomized_svd(&oracle, rank, oversampling, &mut stream)?, &reference),
            (rank + oversampling, rank + oversampling),
        ),
        RecoverInstance::Circulant { .. } => (
            report_json(recover_circulant(&oracle, &mut stream)?, &reference),
            (1, 0),
        ),
        RecoverInstance::Banded { bandwidth, .. } => (
            report_json(recover_banded(&oracle, bandwidth)?, &reference),
            ((2 * bandwidth + 1).min(n), 0),
        ),
        RecoverInstance::Hodlr {
            rank,
            levels,
            oversampling,
            ..
        } => (
            report_json(
                recover_hodlr(&oracle, rank, levels, oversampling, &mut stream)?,
                &reference,
            ),
            hodlr_query_budget(n, rank, levels, oversampling),
        ),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let mut report = json!({
        "instance": r.instance,
        "operator": r.operator,
        "seed": seed,
        "query_budget": { "forward": budget.0, "transpose": budget.1 },
        "wall_time_seconds": elapsed,
    });
    let fields = report.as_object_mut().expect("object literal");
    for (k, v) in outcome.as_object().expect("object literal") {
        fields.insert(k.clone(), v.clone());
    }
    let path = ctx.resolve(&r.report);
    write_json(&path, &report)?;
    Ok(vec![format!(
        "recover: {} queries ({} forward, {} transpose), relative residual {:.3e}, {:.3} s -> {}",
        outcome["total_queries"],
        outcome["forward_queries"],
        outcome["transpose_queries"],
        outcome["residual_frobenius_relative"].as_f64().unwrap_or(f64::NAN),
        elapsed,
        path.display()
    )])
}

fn losses_json(model: &KernelModel, ds: &OperatorDataset, kinds: &[LossKind]) -> Result<Value, CliError> {
    if ds.is_empty() {
        return Ok(Value::Null);
    }
    let predictions = predict_dataset(model, ds)?;
    let mut out = serde_json::Map::new();
    for &kind in kinds {
        out.insert(
            kind.name().to_string(),
            json!(compute_loss(kind, &predictions, &ds.outputs)?),
        );
    }
    Ok(Value::Object(out))
}

pub fn fit(config: &ExperimentConfig, ctx: &Context) -> Result<Vec<String>, CliError> {
    let f = section(&config.fit, "fit")?;
    let dataset_path = ctx.resolve(&f.dataset);
    let ds = load_dataset(&dataset_path)?;
    if ds.is_empty() {
        return Err(CliError::Config(format!(
            "{} holds no pairs to fit",
            dataset_path.display()
        )));
    }
    let train_count = ((f.train_fraction * ds.len() as f64).floor() as usize).clamp(1, ds.len());
    let (train, test) = ds.split_at(train_count);
    log::info!(
        "fitting {:?} on {} train pairs, {} held out",
        f.variant,
        train.len(),
        test.len()
    );

    let mut details = serde_json::Map::new();
    let mut dense_fit = |ridge: Option<f64>| -> Result<DenseKernel, CliError> {
        let fit = fit_green_kernel(&train, ridge)?;
        details.insert("ridge".into(), json!(fit.ridge));
        details.insert("effective_rank".into(), json!(fit.effective_rank));
        details.insert("excluded_pairs".into(), json!(fit.excluded));
        match fit.model {
            KernelModel::Dense(k) => Ok(k),
            _ => unreachable!("dense regression returns a dense kernel"),
        }
    };
    let model = match f.variant {
        VariantConfig::Dense { ridge } => KernelModel::Dense(dense_fit(ridge)?),
        VariantConfig::LowRank { rank, ridge } => KernelModel::LowRank(low_rank_truncate(&dense_fit(ridge)?, rank)?),
        VariantConfig::Banded { radius, ridge } => KernelModel::Banded(truncate_band(&dense_fit(ridge)?, radius)?),
        VariantConfig::Hierarchical { levels, rank, ridge } => {
            KernelModel::Hierarchical(hierarchical_decompose(&dense_fit(ridge)?, levels, rank)?)
        }
        VariantConfig::FourierMultiplier { k_max, ridge } => {
            details.insert("ridge".into(), json!(ridge));
            fit_fourier_multiplier(&train, k_max, ridge)?
        }
    };
    match &model {
        KernelModel::FourierMultiplier(fm) => {
            let modes: Vec<Value> = (-(fm.k_max as i64)..=fm.k_max as i64)
                .map(|j| {
                    let r = fm.coefficient(j);
                    json!({ "mode": j, "re": r.re, "im": r.im })
                })
                .collect();
            details.insert("multiplier".into(), Value::Array(modes));
            details.insert("unexcited_modes".into(), json!(fm.unexcited));
        }
        KernelModel::Banded(b) => {
            details.insert("truncation_error".into(), json!(b.truncation_error));
        }
        KernelModel::Hierarchical(h) => {
            details.insert("reported_error".into(), json!(h.reported_error()));
            details.insert("admissible_blocks".into(), json!(h.blocks.len()));
        }
        _ => {}
    }

    let model_path = ctx.resolve(&f.model);
    save_model(&model_path, &model)?;
    let metrics = json!({
        "model": model.variant_name(),
        "variant": f.variant,
        "dataset": ds.provenance,
        "train_pairs": train.len(),
        "test_pairs": test.len(),
        "details": details,
        "train": losses_json(&model, &train, &f.losses)?,
        "test": losses_json(&model, &test, &f.losses)?,
    });
    let metrics_path = ctx.resolve(&f.metrics);
    write_json(&metrics_path, &metrics)?;
    Ok(vec![format!(
        "fit: {} on {} train / {} test pairs -> {}, {}",
        model.variant_name(),
        train.len(),
        test.len(),
        model_path.display(),
        metrics_path.display()
    )])
}

/// One CSV row of an evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub resolution: usize,
    pub loss_kind: LossKind,
    pub value: f64,
    pub n_pairs: usize,
}

/// Losses of `model` on each dataset, one row per (dataset, loss kind).
pub fn evaluate(
    model: &KernelModel,
    datasets: &[OperatorDataset],
    kinds: &[LossKind],
) -> Result<Vec<EvalRow>, CliError> {
    let mut rows = Vec::new();
    for ds in datasets {
        if matches!(model, KernelModel::FourierMultiplier(_)) {
            evaluate_super_resolution(model, std::slice::from_ref(ds))?;
        }
        let predictions = predict_dataset(model, ds)?;
        for &kind in kinds {
            rows.push(EvalRow {
                resolution: ds.provenance.resolution,
                loss_kind: kind,
                value: compute_loss(kind, &predictions, &ds.outputs)?,
                n_pairs: ds.len(),
            });
        }
    }
    Ok(rows)
}

pub fn render_csv(rows: &[EvalRow]) -> Result<Vec<u8>, csv::Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["resolution", "loss_kind", "value", "n_pairs"])?;
    for row in rows {
        writer.write_record([
            row.resolution.to_string(),
            row.loss_kind.name().to_string(),
            format!("{:e}", row.value),
            row.n_pairs.to_string(),
        ])?;
    }
    Ok(writer.into_inner().expect("in-memory writer flushes"))
}

pub fn eval(config: &ExperimentConfig, ctx: &Context) -> Result<Vec<String>, CliError> {
    let e = section(&config.eval, "eval")?;
    let model = load_model(&ctx.resolve(&e.model))?;
    let datasets = e
        .datasets
        .iter()
        .map(|p| load_dataset(&ctx.resolve(p)))
        .collect::<Result<Vec<_>, _>>()?;
    log::info!("evaluating {} on {} datasets", model.variant_name(), datasets.len());
    let rows = evaluate(&model, &datasets, &e.losses)?;
    let path = ctx.resolve(&e.output);
    let bytes = render_csv(&rows).map_err(|err| CliError::Output {
        path: path.clone(),
        message: err.to_string(),
    })?;
    write_bytes(&path, &bytes)?;
    let mut lines = vec![format!("eval: {} rows -> {}", rows.len(), path.display())];
    lines.extend(rows.iter().map(|r| {
        format!(
            "  s = {:>5}  {:<22} {:.6e}  ({} pairs)",
            r.resolution,
            r.loss_kind.name(),
            r.value,
            r.n_pairs
        )
    }));
    Ok(lines)
}
