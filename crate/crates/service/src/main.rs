// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tropic_service::settings::TailModeName;
use tropic_service::{ConfigOverrides, Settings};

#[derive(Parser)]
#[command(name = "tropic", version, about = "Rate news publishers from social discussion edge lists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once and write the publisher CSV.
    Run {
        /// Edge list: `url,user_id` rows, comma or tab separated.
        edges: PathBuf,
        /// Base knowledge: `domain,score` rows with integer scores 0-100.
        #[arg(short, long)]
        base_knowledge: Option<PathBuf>,
        /// Output CSV; `-` writes to stdout.
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
        /// Reject edge lists with more records than this (0 disables).
        #[arg(long, default_value_t = 0)]
        max_edges: usize,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Start the HTTP service.
    Serve {
        /// Preload the demo job and serve the demo input files.
        #[arg(long)]
        demo: bool,
    },
}

#[derive(clap::Args)]
struct ConfigFlags {
    /// False discovery rate for co-sharing links [default: 0.05]
    #[arg(long, env = "TROPIC_ALPHA")]
    alpha: Option<f64>,
    /// Community detection seed [default: 0]
    #[arg(long, env = "TROPIC_SEED")]
    seed: Option<u64>,
    /// Scores at or above this are labelled T [default: 60]
    #[arg(long, env = "TROPIC_LABEL_THRESHOLD")]
    label_threshold: Option<f64>,
    /// Modularity resolution [default: 1.0]
    #[arg(long)]
    resolution: Option<f64>,
    /// Smallest community, in URLs, that counts as a NEC [default: 2]
    #[arg(long)]
    min_nec_size: Option<usize>,
    /// Tail probability method [default: auto]
    #[arg(long, value_parser = ["exact", "poisson", "auto"])]
    tail_mode: Option<String>,
}

impl ConfigFlags {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            alpha: self.alpha,
            seed: self.seed,
            label_threshold: self.label_threshold,
            resolution: self.resolution,
            min_nec_size: self.min_nec_size,
            tail_mode: self.tail_mode.as_deref().map(|m| match m {
                "exact" => TailModeName::Exact,
                "poisson" => TailModeName::Poisson,
                _ => TailModeName::Auto,
            }),
            ..Default::default()
        }
    }
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;

fn run(
    edges: PathBuf,
    base_knowledge: Option<PathBuf>,
    output: PathBuf,
    max_edges: usize,
    config: ConfigFlags,
) -> Result<(), BoxError> {
    let config = config.overrides().apply(Default::default())?;
    let edges = BufReader::new(File::open(&edges)?);
    let base = base_knowledge.map(|p| File::open(p).map(BufReader::new)).transpose()?;
    let csv = tropic_service::run_to_csv(edges, base, &config, (max_edges > 0).then_some(max_edges))?;
    if output.as_os_str() == "-" {
        std::io::stdout().write_all(csv.as_bytes())?;
    } else {
        std::fs::write(&output, csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result: Result<(), BoxError> = match Cli::parse().command {
        Command::Run {
            edges,
            base_knowledge,
            output,
            max_edges,
            config,
        } => run(edges, base_knowledge, output, max_edges, config),
        Command::Serve { demo } => Settings::from_env().map_err(Into::into).and_then(|settings| {
            tokio::runtime::Runtime::new()?.block_on(tropic_service::serve(settings, demo))
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
