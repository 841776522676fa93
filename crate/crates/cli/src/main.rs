//! `relit` command-line front end. Each subcommand loads its inputs, calls
//! one library entry point and writes the result plus a `manifest.json`.

mod commands;
mod config;
mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;

use commands::Command;
use config::Resolver;
use manifest::{write_manifest, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "relit", version, about = "Relight G-buffer frames and augment demonstration episodes")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// File of `key = value` defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

/// An error on its way to becoming an exit status: 1 for invalid input, 2
/// for I/O.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<relit::Error> for Failure {
    fn from(e: relit::Error) -> Self {
        match e.kind() {
            relit::ErrorKind::Io => Failure::io(e.to_string()),
            relit::ErrorKind::Validation => Failure::validation(e.to_string()),
        }
    }
}

/// State shared by a subcommand and the manifest written after it.
pub struct Run {
    pub params: Resolver,
    pub seed: u64,
    pub verbose: bool,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub manifest_dir: Option<PathBuf>,
    pub partial: bool,
}

impl Run {
    pub fn input(&mut self, name: &str, path: &std::path::Path) {
        self.inputs.insert(name.to_string(), path.display().to_string());
    }

    /// Registers an output file; the manifest goes into its directory.
    pub fn output_file(&mut self, path: &std::path::Path) {
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
        self.manifest_dir = Some(parent.to_path_buf());
        self.outputs.push(path.display().to_string());
    }

    /// Registers an output directory; the manifest goes inside it.
    pub fn output_dir(&mut self, path: &std::path::Path) {
        self.manifest_dir = Some(path.to_path_buf());
        self.outputs.push(path.display().to_string());
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn run(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let setup = || -> Result<(Resolver, usize, u64, bool), Failure> {
        let mut params = Resolver::load(cli.config.as_deref())?;
        let threads = params.get("threads", cli.threads, 0usize)?;
        let seed = params.get("seed", cli.seed, 0u64)?;
        let verbose = params.switch("verbose", cli.verbose)?;
        Ok((params, threads, seed, verbose))
    };
    let (params, threads, seed, verbose) = match setup() {
        Ok(v) => v,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    if threads > 0 {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let mut ctx = Run {
        params,
        seed,
        verbose,
        inputs: BTreeMap::new(),
        outputs: Vec::new(),
        warnings: Vec::new(),
        manifest_dir: None,
        partial: false,
    };
    let result = commands::dispatch(&cli.command, &mut ctx);
    for key in ctx.params.unused() {
        ctx.warnings.push(format!("config key {key} is not used by {}", cli.command.name()));
    }
    for w in &ctx.warnings {
        eprintln!("warning: {w}");
    }
    let (status, error, mut code) = match &result {
        Ok(()) if ctx.partial => ("partial", None, 1),
        Ok(()) => ("ok", None, 0),
        Err(f) => ("error", Some(f.message.clone()), f.code),
    };
    if let Some(dir) = &ctx.manifest_dir {
        let m = RunManifest {
            subcommand: cli.command.name().to_string(),
            parameters: ctx.params.resolved.clone(),
            seed,
            threads: rayon::current_num_threads(),
            inputs: ctx.inputs.clone(),
            outputs: ctx.outputs.clone(),
            wall_clock_s: start.elapsed().as_secs_f64(),
            status: status.to_string(),
            error: error.clone(),
            warnings: ctx.warnings.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        if let Err(e) = write_manifest(&m, dir) {
            eprintln!("error: {}: cannot write manifest: {e}", dir.display());
            if code == 0 {
                code = 2;
            }
        }
    }
    if let Some(msg) = error {
        eprintln!("error: {msg}");
    }
    code
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
