use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use partsketch::dataset::{generate_dataset, read_dataset, write_dataset, DatasetConfig, ShapeClass};
use partsketch::editing::{EditConfig, Editor};
use partsketch::metrics::{evaluate_pairs, retrieval_table, retrieval_topk, DEFAULT_POINTS};
use partsketch::model::{ModelConfig, SketchModel};
use partsketch::render::{normalize_sketch, render_outline, Camera, GrayImage};
use partsketch::service::{serve, ServeConfig};
use partsketch::shape::{read_mesh, write_mesh, LabeledMesh, PartPrimitive};
use partsketch::trainer::{
    evaluate_epoch, refiner_pairs, train_refiner_on, train_sketch2shape, EvalOptions, TrainConfig,
    EVAL_GRID,
};
use partsketch::{Error, Result};

/// Sketch-to-shape generation and part-level editing.
///
/// Config files are JSON with unknown keys rejected. Precedence: built-in
/// defaults, then the config file, then flags.
#[derive(Parser, Debug)]
#[command(name = "partsketch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a procedural dataset of shapes and sketches.
    GenData(GenDataArgs),
    /// Train the sketch-to-latent network.
    Train(TrainArgs),
    /// Train the part refiner.
    TrainRefiner(TrainRefinerArgs),
    /// Score meshes (pairs by file name) or a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Generate a mesh from one sketch.
    Infer(InferArgs),
    /// Render the outline of a part list or of a generated shape.
    Outline(OutlineArgs),
    /// Rank a mesh set by Chamfer distance to a query mesh.
    Retrieve(RetrieveArgs),
    /// Serve the editing API over HTTP.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// JSON dataset config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shape class; repeat for a multi-class set [default: chair].
    #[arg(long = "class")]
    classes: Vec<ShapeClass>,
    /// Number of shapes [default: 64].
    #[arg(long)]
    count: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Part slots [default: 8, or 12 for several classes].
    #[arg(long)]
    m: Option<usize>,
    /// Latent width per part [default: 32].
    #[arg(long)]
    d_model: Option<usize>,
    /// Share of views that also get a partial-outline sample [default: 0.5].
    #[arg(long)]
    partial_fraction: Option<f64>,
    /// Comma-separated view indices in 0..6 [default: all].
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<usize>>,
    /// Skip the abstract (stroke-dropout) style.
    #[arg(long)]
    no_abstract: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CommonTrain {
    /// JSON training config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Model preset: desk or paper_scale [default: desk].
    #[arg(long)]
    preset: Option<String>,
    /// [default: 100]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 16]
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for checkpoints and loss curves.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonTrain,
    /// Held-out dataset used to pick the best checkpoint.
    #[arg(long)]
    heldout: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainRefinerArgs {
    #[command(flatten)]
    common: CommonTrain,
    /// Sketch checkpoint whose predictions become refiner inputs; without it
    /// ground-truth latents are used.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory of predicted meshes (.obj or .json).
    #[arg(long, requires = "reference")]
    pred: Option<PathBuf>,
    /// Directory of reference meshes with matching file names.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Sketch checkpoint to score on --dataset.
    #[arg(long, conflicts_with = "pred", requires = "dataset")]
    model: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Surface samples per mesh.
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also compute the Fréchet feature distance.
    #[arg(long)]
    frechet: bool,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    /// Sketch PNG, any size; it is normalized first.
    #[arg(long)]
    sketch: PathBuf,
    /// Output mesh; `.json` selects the JSON form, anything else OBJ.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = EVAL_GRID)]
    grid_res: usize,
}

#[derive(Args, Debug)]
struct OutlineArgs {
    /// JSON list of part primitives.
    #[arg(long, conflicts_with_all = ["model", "sketch"])]
    parts: Option<PathBuf>,
    /// Sketch checkpoint; renders the shape generated from --sketch.
    #[arg(long, requires = "sketch")]
    model: Option<PathBuf>,
    #[arg(long)]
    sketch: Option<PathBuf>,
    /// Degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    azimuth: f64,
    /// Degrees.
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    elevation: f64,
    /// Output PNG.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    /// Query mesh.
    #[arg(long)]
    query: PathBuf,
    /// Directory of candidate meshes; ids are file stems.
    #[arg(long)]
    set: PathBuf,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON ranking here; the text table goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, env = "PARTSKETCH_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, env = "PARTSKETCH_MODEL")]
    model: PathBuf,
    #[arg(long, env = "PARTSKETCH_REFINER")]
    refiner: Option<PathBuf>,
    #[arg(long, env = "PARTSKETCH_GRID_RES", default_value_t = EVAL_GRID)]
    grid_res: usize,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg: DatasetConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => DatasetConfig::default(),
    };
    if !a.classes.is_empty() {
        cfg.classes = a.classes;
    }
    if let Some(v) = a.count {
        cfg.count = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.m.is_some() {
        cfg.m = a.m;
    }
    if let Some(v) = a.d_model {
        cfg.d_model = v;
    }
    if let Some(v) = a.partial_fraction {
        cfg.partial_fraction = v;
    }
    if let Some(v) = a.views {
        cfg.views = v;
    }
    if a.no_abstract {
        cfg.abstract_style = false;
    }
    let samples = generate_dataset(&cfg)?;
    let manifest = write_dataset(&samples, &cfg, &a.out)?;
    print_json(&json!({"out": a.out, "counts": manifest.counts, "m": manifest.m, "d_model": manifest.d_model}))
}

fn train_config(c: &CommonTrain) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = match &c.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(p) = &c.preset {
        cfg.model = ModelConfig::preset(p)?;
    }
    if c.dataset.is_some() {
        cfg.dataset_dir = c.dataset.clone();
    }
    if let Some(v) = c.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = c.batch_size {
        cfg.batch_size = v;
    }
    if c.max_steps.is_some() {
        cfg.max_steps = c.max_steps;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if c.out.is_some() {
        cfg.out_dir = c.out.clone();
    }
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = train_config(&a.common)?;
    if a.heldout.is_some() {
        cfg.heldout_dir = a.heldout;
    }
    let out = train_sketch2shape(&cfg)?;
    let last = out.curve.last();
    print_json(&json!({
        "steps": out.steps,
        "epochs": out.curve.len(),
        "final_loss_full": last.map(|l| l.loss_full),
        "out_dir": cfg.out_dir,
    }))
}

fn train_refiner(a: TrainRefinerArgs) -> Result<()> {
    let mut cfg = train_config(&a.common)?;
    let dir = cfg
        .dataset_dir
        .clone()
        .ok_or_else(|| Error::Config("a dataset directory is required".into()))?;
    let (manifest, samples) = read_dataset(&dir)?;
    let predictor = a.model.as_deref().map(SketchModel::load).transpose()?;
    if let Some(model) = &predictor {
        cfg.model = model.cfg.clone();
        cfg.refiner_on_predicted = true;
    }
    if manifest.m != cfg.model.m || manifest.d_model != cfg.model.d_model {
        return Err(Error::Config(format!(
            "dataset has m={} d_model={}, model config has m={} d_model={}",
            manifest.m, manifest.d_model, cfg.model.m, cfg.model.d_model
        )));
    }
    let pairs = refiner_pairs(&samples, predictor.as_ref())?;
    let out = train_refiner_on(&cfg, &pairs)?;
    print_json(&json!({
        "steps": out.steps,
        "epochs": out.curve.len(),
        "final_loss_refine": out.curve.last().map(|l| l.loss_refine),
        "out_dir": cfg.out_dir,
    }))
}

fn mesh_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| {
        p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "obj" | "json"))
    });
    files.sort();
    Ok(files)
}

fn eval(a: EvalArgs) -> Result<()> {
    let report = if let Some(model) = &a.model {
        let dir = a.dataset.as_ref().expect("clap requires --dataset");
        let (_, samples) = read_dataset(dir)?;
        let opts = EvalOptions {
            n_points: a.points,
            seed: a.seed,
            ..EvalOptions::default()
        };
        serde_json::to_value(evaluate_epoch(model, &samples, &opts)?)?
    } else {
        let (Some(pred), Some(reference)) = (&a.pred, &a.reference) else {
            return Err(Error::Argument("give --pred and --ref, or --model and --dataset".into()));
        };
        let mut preds = Vec::new();
        let mut refs = Vec::new();
        for p in mesh_files(pred)? {
            let name = p.file_name().expect("listed files have names");
            let r = reference.join(name);
            if !r.exists() {
                return Err(Error::Argument(format!("no reference mesh {}", r.display())));
            }
            preds.push(read_mesh(&p)?);
            refs.push(read_mesh(&r)?);
        }
        serde_json::to_value(evaluate_pairs(&preds, &refs, a.points, a.seed, a.frechet)?)?
    };
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    print_json(&report)
}

fn infer(a: InferArgs) -> Result<()> {
    let editor = Editor::new(
        SketchModel::load(&a.model)?,
        None,
        EditConfig {
            grid_res: a.grid_res,
            ..EditConfig::default()
        },
    )?;
    let sketch = GrayImage::read_png(&a.sketch)?;
    let mut session = editor.new_session("cli");
    let result = editor.generate(&mut session, &sketch)?;
    write_mesh(&a.out, &result.mesh)?;
    print_json(&json!({
        "out": a.out,
        "presence": result.presence,
        "completion": result.completion,
        "faces": result.mesh.faces.len(),
        "warning": result.warning,
    }))
}

fn outline(a: OutlineArgs) -> Result<()> {
    let parts: Vec<PartPrimitive> = match (&a.parts, &a.model, &a.sketch) {
        (Some(p), _, _) => read_json(p)?,
        (None, Some(model), Some(sketch)) => {
            let model = SketchModel::load(model)?;
            let sketch = normalize_sketch(&GrayImage::read_png(sketch)?)?;
            let set = model.predict(&sketch)?.into_part_set();
            set.parts()?.into_iter().map(|(_, p)| p).collect()
        }
        _ => return Err(Error::Argument("give --parts, or --model with --sketch".into())),
    };
    if parts.is_empty() {
        return Err(Error::EmptyShape);
    }
    let camera = Camera::orthographic(a.azimuth.to_radians(), a.elevation.to_radians());
    camera.validate()?;
    render_outline(&parts, &camera)?.write_png(&a.out)?;
    print_json(&json!({"out": a.out, "parts": parts.len()}))
}

fn retrieve(a: RetrieveArgs) -> Result<()> {
    let query = read_mesh(&a.query)?;
    let candidates = mesh_files(&a.set)?
        .into_iter()
        .map(|p| {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, read_mesh(&p)?))
        })
        .collect::<Result<Vec<(String, LabeledMesh)>>>()?;
    let hits = retrieval_topk(&query, &candidates, a.k, a.points, a.seed)?;
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&json!({"query": a.query, "hits": hits}))?)?;
    }
    print!("{}", retrieval_table(&hits));
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let cfg = ServeConfig {
        bind: a.bind,
        model: a.model,
        refiner: a.refiner,
        grid_res: a.grid_res,
    };
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(cfg))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::TrainRefiner(a) => train_refiner(a),
        Command::Eval(a) => eval(a),
        Command::Infer(a) => infer(a),
        Command::Outline(a) => outline(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            ExitCode::from(2)
        }
    }
}

