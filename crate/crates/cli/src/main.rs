//! `scafi`: saliency maps from images and exported CNN features.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use scafi_core::cas::{cas_saliency, CasConfig, Contrast};
use scafi_core::eval::{dataset_eval, SaucConfig, TiePolicy, DEFAULT_SIGMA_GRID};
use scafi_core::formats::{load_dataset, load_image, read_map, read_sfm1, render_heatmap, save_image, write_map};
use scafi_core::fusion::{fuse, maxima_normalize, FusionStrategy, MnConfig, Neighborhood};
use scafi_core::sas::{sas_saliency, Eq3Mode, LayerWeights};
use scafi_core::{Image, SaliencyMap};

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 42;
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "scafi", version, about = "Saliency from contrast and semantic features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Contrast-based map from an image.
    Cas {
        image: PathBuf,
        #[command(flatten)]
        cas: CasFlags,
        #[command(flatten)]
        out: MapOutput,
    },
    /// Semantic map from an SFM1 feature file.
    Sas {
        features: PathBuf,
        #[command(flatten)]
        sas: SasFlags,
        /// Output map (.f32 or .png).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fused map from an image and its feature file.
    Scafi {
        image: PathBuf,
        features: PathBuf,
        #[command(flatten)]
        sas: SasFlags,
        #[arg(long, default_value = "mn")]
        fusion: FusionStrategy,
        #[command(flatten)]
        mn: MnFlags,
        #[command(flatten)]
        cas: CasFlags,
        #[command(flatten)]
        out: MapOutput,
    },
    /// Maxima normalization of an existing map.
    Mn {
        map: PathBuf,
        #[command(flatten)]
        mn: MnFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shuffled-AUC blur sweep over a dataset of maps and fixations.
    Eval {
        /// Directory of `<id>.json` fixation files.
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of `<id>.f32` / `<id>.png` maps.
        #[arg(long)]
        maps: PathBuf,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Blur widths as fractions of image width.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIGMA_GRID)]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the synthetic stimuli, feature stacks and eval dataset.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct CasFlags {
    /// Odd window sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5, 7])]
    scales: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// tanh or gauss.
    #[arg(long, default_value = "tanh", value_parser = parse_contrast)]
    nonlinearity: Contrast,
    #[arg(long, default_value_t = 20_000)]
    patch_cap: usize,
    #[arg(long, default_value_t = 320)]
    max_width: usize,
    #[arg(long, default_value_t = 100)]
    bins: usize,
}

impl CasFlags {
    fn config(&self) -> CasConfig {
        CasConfig {
            scales: self.scales.clone(),
            stride: self.stride,
            max_ica_iterations: self.max_iter,
            ica_tolerance: self.tol,
            ica_nonlinearity: self.nonlinearity,
            training_patch_cap: self.patch_cap,
            rng_seed: self.seed,
            working_max_width: self.max_width,
            bin_count: self.bins,
            ..CasConfig::default()
        }
    }
}

#[derive(Args)]
struct SasFlags {
    /// w1..w5, all, or five comma-separated weights.
    #[arg(long, default_value = "w5")]
    weights: LayerWeights,
    #[arg(long, default_value = "standard")]
    eq3: Eq3Mode,
}

#[derive(Args)]
struct MnFlags {
    #[arg(long, default_value_t = 0.1)]
    thresh: f64,
    /// eight or diagonal.
    #[arg(long, default_value = "eight", value_parser = parse_neighborhood)]
    neighborhood: Neighborhood,
}

impl MnFlags {
    fn config(&self) -> Result<MnConfig, Failure> {
        let cfg = MnConfig {
            local_max_threshold: self.thresh,
            neighborhood: self.neighborhood,
        };
        cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MapOutput {
    /// Output map (.f32 or .png).
    #[arg(long)]
    out: PathBuf,
    /// Optional overlay PNG.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

fn parse_contrast(s: &str) -> Result<Contrast, String> {
    match s {
        "tanh" => Ok(Contrast::Tanh),
        "gauss" => Ok(Contrast::Gauss),
        _ => Err(format!("unknown nonlinearity {s:?}")),
    }
}

fn parse_neighborhood(s: &str) -> Result<Neighborhood, String> {
    match s {
        "eight" => Ok(Neighborhood::Eight),
        "diagonal" => Ok(Neighborhood::Diagonal),
        _ => Err(format!("unknown neighborhood {s:?}")),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn report(&self) -> String {
        let (kind, msg) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Runtime(m) => ("runtime", m),
        };
        json!({ "error": kind, "message": msg }).to_string()
    }
}

impl From<scafi_core::Error> for Failure {
    fn from(e: scafi_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn require(path: &Path, what: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} not found: {}", path.display())))
    }
}

fn check_map_ext(path: &Path) -> Result<(), Failure> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f32") | Some("png") => Ok(()),
        _ => Err(Failure::usage(format!(
            "output map must end in .f32 or .png: {}",
            path.display()
        ))),
    }
}

#[derive(Serialize)]
struct Sidecar<C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    inputs: Vec<String>,
    config: C,
    width: usize,
    height: usize,
}

/// Writes `map` and its `<out>.json` record.
fn emit<C: Serialize>(
    out: &Path,
    map: &SaliencyMap,
    command: &'static str,
    seed: Option<u64>,
    inputs: &[&Path],
    config: C,
) -> Result<(), Failure> {
    write_map(out, map)?;
    let sidecar = Sidecar {
        tool: "scafi",
        version: VERSION,
        command,
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        config,
        width: map.width(),
        height: map.height(),
    };
    let mut path = out.as_os_str().to_owned();
    path.push(".json");
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", Path::new(&path).display())))
}

fn heatmap(out: &MapOutput, image: &Image, map: &SaliencyMap) -> Result<(), Failure> {
    if let Some(path) = &out.heatmap {
        save_image(path, &render_heatmap(image, map, out.alpha)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Cas { image, cas, out } => {
            require(&image, "image")?;
            check_map_ext(&out.out)?;
            let cfg = cas.config();
            cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
            let img = load_image(&image)?;
            let map = cas_saliency(&img, &cfg)?;
            emit(&out.out, &map, "cas", Some(cfg.rng_seed), &[&image], json!({ "cas": cfg }))?;
            heatmap(&out, &img, &map)
        }
        Command::Sas { features, sas, out } => {
            require(&features, "features")?;
            check_map_ext(&out)?;
            let stack = read_sfm1(&features)?;
            let map = sas_saliency(&stack, &sas.weights, sas.eq3)?;
            let config = json!({ "weights": sas.weights, "eq3": sas.eq3 });
            emit(&out, &map, "sas", None, &[&features], config)
        }
        Command::Scafi {
            image,
            features,
            sas,
            fusion,
            mn,
            cas,
            out,
        } => {
            require(&image, "image")?;
            require(&features, "features")?;
            check_map_ext(&out.out)?;
            let cas_cfg = cas.config();
            cas_cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
            let mn_cfg = mn.config()?;
            let img = load_image(&image)?;
            let stack = read_sfm1(&features)?;
            let mut sas_map = sas_saliency(&stack, &sas.weights, sas.eq3)?;
            if sas_map.dims() != (img.width(), img.height()) {
                log::warn!(
                    "features describe a {}x{} image, input is {}x{}; resizing SAS map",
                    sas_map.width(),
                    sas_map.height(),
                    img.width(),
                    img.height()
                );
                sas_map = sas_map.resize_bilinear(img.width(), img.height())?;
            }
            let cas_map = cas_saliency(&img, &cas_cfg)?;
            let map = fuse(&sas_map, &cas_map, fusion, &mn_cfg)?;
            let config = json!({
                "weights": sas.weights,
                "eq3": sas.eq3,
                "fusion": fusion,
                "mn": mn_cfg,
                "cas": cas_cfg,
            });
            emit(&out.out, &map, "scafi", Some(cas_cfg.rng_seed), &[&image, &features], config)?;
            heatmap(&out, &img, &map)
        }
        Command::Mn { map, mn, out } => {
            require(&map, "map")?;
            check_map_ext(&out)?;
            let cfg = mn.config()?;
            let result = maxima_normalize(&read_map(&map)?, &cfg);
            emit(&out, &result, "mn", None, &[&map], json!({ "mn": cfg }))
        }
        Command::Eval {
            dataset,
            maps,
            reps,
            sigmas,
            seed,
            out,
        } => {
            require(&dataset, "dataset")?;
            require(&maps, "maps")?;
            if reps == 0 {
                return Err(Failure::usage("--reps must be >= 1"));
            }
            if sigmas.is_empty() || sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                return Err(Failure::usage("--sigmas must be non-negative fractions"));
            }
            let cfg = SaucConfig {
                repetitions: reps,
                rng_seed: seed,
                tie_policy: TiePolicy::HalfCredit,
            };
            let entries = load_dataset(&dataset, &maps)?;
            let report = dataset_eval(&entries, &sigmas, &cfg)?;
            let doc = json!({ "tool": "scafi", "version": VERSION, "report": report });
            let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Fixtures { out, seed } => {
            scafi_core::fixtures::write_all(&out, seed)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or(&msg)
                .trim_start_matches("error: ")
                .to_string();
            let failure = Failure::usage(first);
            eprintln!("{}", failure.report());
            return ExitCode::from(failure.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.exit_code())
        }
    }
}
