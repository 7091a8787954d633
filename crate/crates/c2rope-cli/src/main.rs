//! `c2rope` — command-line harness for triplet positional indexing,
//! frequency allocation, Chebyshev masking, decay/flow analyses and toy
//! decoder runs. Every subcommand is deterministic given its flags: all
//! randomness flows from explicit seeds, files are written atomically,
//! and re-running a command reproduces its outputs byte for byte.
//!
//! Exit codes: 0 success, 1 invalid usage or configuration, 2 internal
//! (I/O) failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use c2rope::analysis::{
    bottom_top_row_ratio, decay_curve, flow_by_position, info_flow, spatial_decay_map,
};
use c2rope::config::RunConfig;
use c2rope::export;
use c2rope::maskgen::{build_mask, MaskKind};
use c2rope::posindex::{GridShape, MultiViewLayout};
use c2rope::rotary::{make_allocation, Component, Variant};
use c2rope::selfcheck;
use c2rope::toynet::{Model, TokenSequence};

#[derive(Parser)]
#[command(
    name = "c2rope",
    version,
    about = "Positional-encoding workbench: triplet indices, rotary frequency allocations, Chebyshev masks, decay/flow analyses and a seeded toy decoder"
)]
struct Cli {
    /// Directory for generated files (created if missing)
    #[arg(long, global = true, env = "C2ROPE_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dump the (m, x, y) triplet index of every token as CSV
    Indices {
        /// Image-token grid per view, ROWSxCOLS
        #[arg(long, default_value = "4x4")]
        grid: String,
        /// Number of views
        #[arg(long, default_value_t = 1)]
        views: usize,
        /// Number of trailing text tokens
        #[arg(long, default_value_t = 0)]
        text: usize,
    },
    /// Dump a variant's pair-to-component frequency allocation as CSV
    Freq {
        /// Encoding: vanilla | mrope_like | videorope_like | c2rope
        #[arg(long, default_value = "c2rope")]
        variant: String,
        /// Head dimension (multiple of 8)
        #[arg(long, default_value_t = 64)]
        dim: usize,
    },
    /// Build an attention mask and dump it as CSV and PGM
    Mask {
        #[arg(long, default_value = "4x4")]
        grid: String,
        #[arg(long, default_value_t = 1)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        text: usize,
        /// Mask kind: causal | chebyshev
        #[arg(long, default_value = "chebyshev")]
        kind: String,
    },
    /// Monte-Carlo decay sweep of |score| vs offset along one component
    Decay {
        #[arg(long, default_value = "vanilla")]
        variant: String,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Offset component: m | x | y
        #[arg(long, default_value = "m")]
        component: String,
        #[arg(long, default_value_t = 256)]
        max_delta: usize,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Spatial decay heatmap over a grid of (x, y) offsets
    Spatial {
        #[arg(long, default_value = "c2rope")]
        variant: String,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value = "8x8")]
        grid: String,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Forward the toy decoder under a run config; dump logits and traces
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Also generate this many greedy tokens
        #[arg(long, default_value_t = 0)]
        steps: usize,
        /// Directory for per-layer/head attention CSVs
        #[arg(long)]
        dump_trace: Option<PathBuf>,
    },
    /// Image-to-text flow map plus per-position flow of generated tokens
    Flow {
        #[command(flatten)]
        run: RunArgs,
        /// Greedy generation steps feeding the per-position series
        #[arg(long, default_value_t = 4)]
        steps: usize,
    },
    /// Run two encodings on identical inputs and write a diff summary
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Encoding to compare the configured one against
        #[arg(long, default_value = "vanilla")]
        against: String,
    },
    /// Re-verify the library's invariants; print one line per property
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// key=value run config file (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set seed=7 (repeatable; wins over
    /// the file)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV of image embeddings replacing the seeded synthetic ones
    #[arg(long)]
    image_embeddings: Option<PathBuf>,
}

enum CliError {
    User(String),
    Internal(String),
}

impl From<c2rope::Error> for CliError {
    fn from(e: c2rope::Error) -> CliError {
        CliError::User(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let out = Outputs::new(cli.out_dir);
    match cli.cmd {
        Cmd::Indices { grid, views, text } => {
            let layout = parse_layout(&grid, views, text)?;
            out.write("indices.csv", &export::indices_csv(&layout))
        }
        Cmd::Freq { variant, dim } => {
            let alloc = make_allocation(variant.parse()?, dim)?;
            out.write("freq.csv", &export::freq_csv(&alloc))
        }
        Cmd::Mask {
            grid,
            views,
            text,
            kind,
        } => {
            let layout = parse_layout(&grid, views, text)?;
            let kind: MaskKind = kind.parse()?;
            let mask = build_mask(&layout, kind)?;
            out.write("mask.csv", &export::mask_csv(&mask, kind, &layout))?;
            out.write("mask.pgm", &export::mask_pgm(&mask))
        }
        Cmd::Decay {
            variant,
            dim,
            component,
            max_delta,
            samples,
            seed,
        } => {
            let alloc = make_allocation(variant.parse()?, dim)?;
            let component: Component = component.parse()?;
            let series = decay_curve(&alloc, component, max_delta, samples, seed)?;
            out.write("decay.csv", &export::decay_csv(&series))
        }
        Cmd::Spatial {
            variant,
            dim,
            grid,
            samples,
            seed,
        } => {
            let alloc = make_allocation(variant.parse()?, dim)?;
            let grid: GridShape = grid.parse()?;
            let map = spatial_decay_map(&alloc, grid, samples, seed)?;
            let name = alloc.variant().name();
            out.write("spatial.csv", &export::flow_map_csv(&map, seed, name))?;
            out.write("spatial.pgm", &export::map_pgm(&map, seed, name))?;
            out.write("spatial.svg", &export::map_svg(&map, seed, name))
        }
        Cmd::Run {
            run,
            steps,
            dump_trace,
        } => cmd_run(&out, run, steps, dump_trace),
        Cmd::Flow { run, steps } => cmd_flow(&out, run, steps),
        Cmd::Compare { run, against } => cmd_compare(&out, run, &against),
        Cmd::Selfcheck { seed } => cmd_selfcheck(seed),
    }
}

/// Loads the config file (or defaults), applies --set overrides, and
/// validates the result.
fn resolve_config(run: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = match &run.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &run.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::User(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.apply(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Builds the input sequence: user-supplied embeddings CSV if given,
/// seeded synthetic inputs otherwise.
fn resolve_sequence(run: &RunArgs, cfg: &RunConfig) -> CliResult<TokenSequence> {
    let layout = cfg.layout()?;
    match &run.image_embeddings {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
            let embeddings = export::parse_embeddings_csv(&text)?;
            if embeddings.first().map(Vec::len).unwrap_or(0) != cfg.model_config().model_dim()
                && !embeddings.is_empty()
            {
                return Err(CliError::User(format!(
                    "embedding width {} does not match heads*head_dim = {}",
                    embeddings[0].len(),
                    cfg.model_config().model_dim()
                )));
            }
            // text ids still come from the seed
            let synthetic = TokenSequence::synthetic(
                layout,
                cfg.model_config().model_dim(),
                cfg.vocab,
                cfg.seed,
            )?;
            Ok(TokenSequence::new(
                layout,
                embeddings,
                synthetic.text_ids().to_vec(),
            )?)
        }
        None => Ok(TokenSequence::synthetic(
            layout,
            cfg.model_config().model_dim(),
            cfg.vocab,
            cfg.seed,
        )?),
    }
}

fn cmd_run(
    out: &Outputs,
    run: RunArgs,
    steps: usize,
    dump_trace: Option<PathBuf>,
) -> CliResult<()> {
    let cfg = resolve_config(&run)?;
    let seq = resolve_sequence(&run, &cfg)?;
    let model = Model::new(cfg.model_config())?;
    let (logits, trace) = model.forward(&seq)?;

    out.write("config.txt", &cfg.to_config_text())?;
    let mut csv = format!(
        "# seed={} variant={} normalization=none\n",
        cfg.seed, cfg.encoding
    );
    for i in 0..logits.rows() {
        let row: Vec<String> = logits.row(i).iter().map(f64::to_string).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    out.write("logits.csv", &csv)?;

    if steps > 0 {
        let (ids, _) = model.generate(&seq, steps)?;
        let mut gen = format!("# seed={} variant={}\nstep,token\n", cfg.seed, cfg.encoding);
        for (s, id) in ids.iter().enumerate() {
            writeln!(gen, "{},{id}", s + 1).expect("string write");
        }
        out.write("generated.csv", &gen)?;
    }

    if let Some(dir) = dump_trace {
        let tr = Outputs::new(dir);
        for layer in 0..trace.layers() {
            for head in 0..trace.heads() {
                let mat = trace.get(layer, head);
                let mut csv = format!(
                    "# seed={} variant={} layer={layer} head={head} normalization=rows-sum-1\n",
                    cfg.seed, cfg.encoding
                );
                for i in 0..mat.rows() {
                    let row: Vec<String> = mat.row(i).iter().map(f64::to_string).collect();
                    csv.push_str(&row.join(","));
                    csv.push('\n');
                }
                tr.write(&format!("trace_l{layer}_h{head}.csv"), &csv)?;
            }
        }
    }
    Ok(())
}

fn cmd_flow(out: &Outputs, run: RunArgs, steps: usize) -> CliResult<()> {
    let cfg = resolve_config(&run)?;
    if steps == 0 {
        return Err(CliError::User("flow needs --steps of at least 1".into()));
    }
    let seq = resolve_sequence(&run, &cfg)?;
    let layout = cfg.layout()?;
    let model = Model::new(cfg.model_config())?;
    let (_, trace) = model.forward(&seq)?;
    let map = info_flow(&trace, &layout)?;
    let name = cfg.encoding.name();
    out.write("flow_map.csv", &export::flow_map_csv(&map, cfg.seed, name))?;
    out.write("flow_map.pgm", &export::map_pgm(&map, cfg.seed, name))?;
    out.write("flow_map.svg", &export::map_svg(&map, cfg.seed, name))?;

    let (_, traces) = model.generate(&seq, steps)?;
    let series = flow_by_position(&traces, &layout)?;
    let csv = export::flow_series_csv(&series, cfg.seed, name);
    // emit-parse integrity: the file we ship must read back losslessly
    let back = export::parse_flow_series_csv(&csv)
        .map_err(|e| CliError::Internal(format!("emitted series does not re-parse: {e}")))?;
    if back != series {
        return Err(CliError::Internal(
            "emitted flow series does not round-trip".into(),
        ));
    }
    out.write("flow_series.csv", &csv)
}

fn cmd_compare(out: &Outputs, run: RunArgs, against: &str) -> CliResult<()> {
    let cfg_a = resolve_config(&run)?;
    let variant_b: Variant = against.parse()?;
    let mut cfg_b = cfg_a.clone();
    cfg_b.encoding = variant_b;
    cfg_b.validate()?;

    let seq = resolve_sequence(&run, &cfg_a)?;
    let layout = cfg_a.layout()?;
    let (logits_a, trace_a) = Model::new(cfg_a.model_config())?.forward(&seq)?;
    let (logits_b, trace_b) = Model::new(cfg_b.model_config())?.forward(&seq)?;

    let max_logit_diff = logits_a
        .data()
        .iter()
        .zip(logits_b.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let (mut sum_diff, mut count) = (0.0, 0usize);
    for (ma, mb) in trace_a.mats().iter().zip(trace_b.mats()) {
        for (a, b) in ma.data().iter().zip(mb.data()) {
            sum_diff += (a - b).abs();
            count += 1;
        }
    }

    let mut report = format!(
        "# seed={} grid={} views={} text={} mask={}\nencoding_a={}\nencoding_b={}\nmax_abs_logit_diff={max_logit_diff}\nmean_abs_trace_diff={}\n",
        cfg_a.seed,
        cfg_a.grid,
        cfg_a.views,
        cfg_a.text,
        cfg_a.mask,
        cfg_a.encoding,
        cfg_b.encoding,
        sum_diff / count.max(1) as f64
    );
    if cfg_a.text > 0 && cfg_a.views > 0 {
        let ratio_a = bottom_top_row_ratio(&info_flow(&trace_a, &layout)?);
        let ratio_b = bottom_top_row_ratio(&info_flow(&trace_b, &layout)?);
        writeln!(report, "bottom_top_ratio_a={ratio_a}").expect("string write");
        writeln!(report, "bottom_top_ratio_b={ratio_b}").expect("string write");
    }
    out.write("compare.txt", &report)
}

fn cmd_selfcheck(seed: u64) -> CliResult<()> {
    let outcomes = selfcheck::run_all(seed);
    for o in &outcomes {
        let tag = match (o.kind, o.passed) {
            (selfcheck::CheckKind::Info, _) => "INFO",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        println!("{tag} {}: {}", o.name, o.detail);
    }
    if selfcheck::all_passed(&outcomes) {
        Ok(())
    } else {
        Err(CliError::User("selfcheck found failing properties".into()))
    }
}

fn parse_layout(grid: &str, views: usize, text: usize) -> CliResult<MultiViewLayout> {
    let grid: GridShape = grid.parse()?;
    Ok(MultiViewLayout::new(grid, views, text)?)
}

/// Output-directory handle; all files go through an atomic
/// write-to-temp-then-rename so failed runs never leave partial files.
struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn new(dir: PathBuf) -> Outputs {
        Outputs { dir }
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        fs::create_dir_all(&self.dir).map_err(|e| {
            CliError::Internal(format!("cannot create {}: {e}", self.dir.display()))
        })?;
        let path = self.dir.join(name);
        write_atomic(&path, contents)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".{}.tmp", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    match fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}
