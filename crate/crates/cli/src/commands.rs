use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use equin::encoder::{init_encoder, Checkpoint, EncoderConfig};
use equin::evaluation::{
    disentanglement, entropy_diagnostic, hit_rate, stabilizer_recovery, test_points,
    write_embeddings_csv, CosetOracle, Embedder, EvalError, HitRateConfig, MetricsRow,
    ModelEmbedder, METRICS_CSV_HEADER, METRICS_CSV_VERSION,
};
use equin::synthetic::Dataset;
use equin::training::{train_from, RunWriter};

use crate::config::{RunConfig, DEFAULT_SWEEP_SEEDS};
use crate::error::CliError;

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const SWEEP_CSV: &str = "sweep.csv";

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
    Dataset::from_bytes(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::output(path, e))
}

/// Orbit table with stabilizer orders and split sizes.
pub fn dataset_summary(data: &Dataset) -> String {
    let spec = data.spec();
    let bytes = data.to_bytes();
    let crc = u32::from_le_bytes(
        bytes[bytes.len() - 4..]
            .try_into()
            .expect("trailing checksum"),
    );
    let mut s = String::new();
    let test = data.test_triplets().len();
    let _ = writeln!(
        s,
        "dataset {}  seed {}  crc32 {crc:08x}",
        spec.name, spec.seed
    );
    if let Some(g) = spec.group() {
        let _ = writeln!(
            s,
            "group {g}  feature_dim {}  noise_sigma {}",
            spec.feature_dim().unwrap_or(0),
            spec.noise_sigma
        );
    }
    let _ = writeln!(
        s,
        "triplets {}  train {}  test {test}",
        data.len(),
        data.len() - test
    );
    let _ = writeln!(
        s,
        "{:>5}  {:<10}  {:>5}  {:>8}",
        "orbit", "stabilizer", "order", "triplets"
    );
    for o in &spec.orbits {
        let count = data
            .triplets()
            .iter()
            .filter(|t| t.x.orbit_id == o.orbit_id)
            .count();
        let _ = writeln!(
            s,
            "{:>5}  {:<10}  {:>5}  {:>8}",
            o.orbit_id,
            o.stabilizer.tag(),
            o.stabilizer.order(),
            count
        );
    }
    s
}

pub fn generate(config: &RunConfig, out: &Path) -> Result<String, CliError> {
    let spec = config.dataset_spec()?;
    let data = Dataset::generate(&spec)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(out, data.to_bytes()).map_err(|e| CliError::output(out, e))?;
    let summary = dataset_summary(&data);
    write_file(&summary_path(out), &summary)?;
    Ok(summary)
}

pub fn summary_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".summary.txt");
    PathBuf::from(name)
}

fn model_tag(heads: usize) -> String {
    if heads == 1 {
        "baseline".into()
    } else {
        format!("equin{heads}")
    }
}

/// Outcome of one training run.
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    pub final_equivariance: f64,
    pub epochs: usize,
    pub wall_clock: f64,
}

pub fn train(config: &RunConfig, data: &Dataset, dir: &Path) -> Result<TrainOutcome, CliError> {
    let group = data
        .spec()
        .group()
        .cloned()
        .ok_or_else(|| CliError::Config("dataset has no orbits".into()))?;
    let dim = data.spec().feature_dim().unwrap_or(0);
    let encoder = config.encoder_config(dim, group)?;
    let train_config = config.train_config()?;
    let triplets = data.training_view::<f64>();
    if triplets.len() < 2 {
        return Err(CliError::Config(
            "dataset has fewer than two training triplets".into(),
        ));
    }
    create_dir(dir)?;
    let mut snapshot = config.clone();
    snapshot.output = Some(dir.to_path_buf());
    write_file(&dir.join(CONFIG_SNAPSHOT), &snapshot.to_toml())?;
    let (full, rest) = (
        triplets.len() / train_config.batch_size,
        triplets.len() % train_config.batch_size,
    );
    let steps_per_epoch = (full + usize::from(rest >= 2)) as u64;
    let mut run = RunWriter::create(
        dir,
        &encoder,
        config.training.checkpoint_every,
        steps_per_epoch,
    )?;
    let init = init_encoder::<f64>(&encoder)?;
    let report = train_from(&triplets, &encoder, &train_config, init, |m, p| {
        eprintln!(
            "epoch {:>3}  L_G {:.4}  entropy {:.4}  L_O {:.4}  ({:.1}s)",
            m.epoch, m.losses.equivariance, m.losses.entropy, m.losses.orbit, m.seconds
        );
        run.record(m, p)
    })?;
    let checkpoint = run.finish(report.steps, &report.params)?;
    Ok(TrainOutcome {
        dir: dir.to_path_buf(),
        checkpoint,
        final_equivariance: report.final_losses().equivariance,
        epochs: report.epochs.len(),
        wall_clock: report.wall_clock,
    })
}

pub struct Labels {
    pub model: String,
    pub lambda: f64,
    pub seed: u64,
}

/// All four test-set metrics. Disentanglement is left empty for groups
/// with an SO(3) factor.
pub fn evaluate(
    embedder: &dyn Embedder,
    data: &Dataset,
    heads: usize,
    labels: &Labels,
    hit: &HitRateConfig,
) -> Result<MetricsRow, CliError> {
    let tests = data.test_triplets();
    let points = test_points(data);
    let hit_rate = hit_rate(embedder, &tests, hit)?;
    let disentanglement = match disentanglement(embedder, &points, hit.seed) {
        Ok(r) => Some(r.mean),
        Err(EvalError::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(MetricsRow {
        dataset: data.spec().name.tag().into(),
        model: labels.model.clone(),
        heads,
        lambda: labels.lambda,
        seed: labels.seed,
        hit_rate,
        disentanglement,
        entropy: entropy_diagnostic(embedder, &points)?,
        stabilizer_recovery: stabilizer_recovery(embedder, data, &points)?,
    })
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("# metrics-csv-version={METRICS_CSV_VERSION}\n{METRICS_CSV_HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

fn write_embeddings(embedder: &dyn Embedder, data: &Dataset, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut out = BufWriter::new(file);
    write_embeddings_csv(embedder, &test_points(data), &mut out)?;
    out.flush().map_err(|e| CliError::output(path, e))
}

/// Where an evaluated model comes from.
pub enum Model {
    Checkpoint(PathBuf),
    /// The ground-truth coset encoder with this many heads.
    Oracle(usize),
}

fn compatible(encoder: &EncoderConfig, data: &Dataset) -> Result<(), CliError> {
    let group = data.spec().group();
    let dim = data.spec().feature_dim();
    if group != Some(&encoder.group) || dim != Some(encoder.input_dim) {
        return Err(CliError::Config(format!(
            "checkpoint expects {} inputs on {}, dataset has {} on {}",
            encoder.input_dim,
            encoder.group,
            dim.unwrap_or(0),
            group.map(|g| g.to_string()).unwrap_or_default()
        )));
    }
    Ok(())
}

/// Labels recorded next to a checkpoint by `train`, if any.
fn run_labels(checkpoint: &Path) -> Option<RunConfig> {
    let snapshot = checkpoint.parent()?.join(CONFIG_SNAPSHOT);
    RunConfig::load(&snapshot).ok()
}

fn embedder_for(
    model: &Model,
    data: &Dataset,
    config: &RunConfig,
) -> Result<(Box<dyn Embedder>, usize, Labels), CliError> {
    match model {
        Model::Checkpoint(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
            let ck = Checkpoint::from_bytes(&bytes)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            compatible(&ck.config, data)?;
            let run = run_labels(path);
            let labels = Labels {
                model: model_tag(ck.config.heads),
                lambda: run
                    .as_ref()
                    .map_or(config.training.lambda, |r| r.training.lambda),
                seed: run
                    .as_ref()
                    .map_or(config.training.seed, |r| r.training.seed),
            };
            let heads = ck.config.heads;
            let params = ck.params_as::<f64>();
            Ok((
                Box::new(ModelEmbedder::new(ck.config, params)),
                heads,
                labels,
            ))
        }
        Model::Oracle(heads) => {
            let labels = Labels {
                model: "oracle".into(),
                lambda: 0.0,
                seed: 0,
            };
            Ok((
                Box::new(CosetOracle::new(data.spec(), *heads)?),
                *heads,
                labels,
            ))
        }
    }
}

pub fn eval(
    config: &RunConfig,
    model: &Model,
    data: &Dataset,
    out: &Path,
) -> Result<MetricsRow, CliError> {
    let hit = config.hit_rate_config()?;
    let (embedder, heads, labels) = embedder_for(model, data, config)?;
    let row = evaluate(embedder.as_ref(), data, heads, &labels, &hit)?;
    create_dir(out)?;
    write_file(
        &out.join("metrics.csv"),
        &metrics_csv(std::slice::from_ref(&row)),
    )?;
    if config.evaluation.export_embeddings {
        write_embeddings(embedder.as_ref(), data, &out.join("embeddings.csv"))?;
    }
    Ok(row)
}

pub fn export_embeddings(
    config: &RunConfig,
    model: &Model,
    data: &Dataset,
    out: &Path,
) -> Result<(), CliError> {
    let (embedder, _, _) = embedder_for(model, data, config)?;
    write_embeddings(embedder.as_ref(), data, out)
}

pub fn export_dataset(data: &Dataset, out: &Path) -> Result<(), CliError> {
    let file = File::create(out).map_err(|e| CliError::output(out, e))?;
    let mut w = BufWriter::new(file);
    data.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::output(out, e))
}

/// One cell of a sweep grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub heads: usize,
    pub lambda: f64,
    pub seed: u64,
}

pub fn sweep_grid(config: &RunConfig) -> Result<Vec<Cell>, CliError> {
    let s = &config.sweep;
    let heads = s
        .heads
        .clone()
        .unwrap_or_else(|| vec![config.encoder.heads]);
    let lambdas = s
        .lambda
        .clone()
        .unwrap_or_else(|| vec![config.training.lambda]);
    let seeds = s
        .seeds
        .clone()
        .unwrap_or_else(|| DEFAULT_SWEEP_SEEDS.to_vec());
    if heads.is_empty() || lambdas.is_empty() || seeds.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let mut cells = Vec::new();
    for &h in &heads {
        for &l in &lambdas {
            for &seed in &seeds {
                cells.push(Cell {
                    heads: h,
                    lambda: l,
                    seed,
                });
            }
        }
    }
    for c in &cells {
        cell_config(config, c).validate()?;
    }
    Ok(cells)
}

fn cell_config(base: &RunConfig, cell: &Cell) -> RunConfig {
    let mut c = base.clone();
    c.encoder.heads = cell.heads;
    c.training.lambda = cell.lambda;
    c.training.seed = cell.seed;
    c.encoder.init_seed = None;
    c.evaluation.seed = cell.seed;
    c
}

pub fn cell_dir(root: &Path, cell: &Cell) -> PathBuf {
    root.join(format!(
        "N{}-lambda{}-seed{}",
        cell.heads, cell.lambda, cell.seed
    ))
}

pub const SWEEP_EXTRA_COLUMNS: &str = "final_L_G,status";

/// Trains and evaluates every cell in order; a failing cell is recorded and
/// the sweep moves on. Returns the number of failed cells.
pub fn sweep(config: &RunConfig, data: &Dataset, root: &Path) -> Result<(usize, usize), CliError> {
    let cells = sweep_grid(config)?;
    create_dir(root)?;
    let csv_path = root.join(SWEEP_CSV);
    let file = File::create(&csv_path).map_err(|e| CliError::output(&csv_path, e))?;
    let mut csv = BufWriter::new(file);
    let io = |e: std::io::Error| CliError::output(&csv_path, e);
    writeln!(csv, "# metrics-csv-version={METRICS_CSV_VERSION}").map_err(io)?;
    writeln!(csv, "{METRICS_CSV_HEADER},{SWEEP_EXTRA_COLUMNS}").map_err(io)?;
    let mut failed = 0;
    for (i, cell) in cells.iter().enumerate() {
        eprintln!(
            "cell {}/{}: N={} lambda={} seed={}",
            i + 1,
            cells.len(),
            cell.heads,
            cell.lambda,
            cell.seed
        );
        let c = cell_config(config, cell);
        let dir = cell_dir(root, cell);
        let result = train(&c, data, &dir).and_then(|outcome| {
            let row = eval(
                &c,
                &Model::Checkpoint(outcome.checkpoint.clone()),
                data,
                &dir.join("eval"),
            )?;
            Ok((row, outcome.final_equivariance))
        });
        let line = match result {
            Ok((row, lg)) => format!("{},{lg},ok", row.to_csv()),
            Err(e) => {
                failed += 1;
                eprintln!("cell failed: {e}");
                let reason = e.to_string().replace([',', '\n'], ";");
                format!(
                    "{},{},{},{},{},,,,,,failed (exit {}): {reason}",
                    data.spec().name.tag(),
                    model_tag(cell.heads),
                    cell.heads,
                    cell.lambda,
                    cell.seed,
                    e.exit_code()
                )
            }
        };
        writeln!(csv, "{line}").map_err(io)?;
        csv.flush().map_err(io)?;
    }
    Ok((cells.len(), failed))
}
