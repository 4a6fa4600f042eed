//! Subcommands of the `mtptune` binary, callable in-process.

pub mod args;
pub mod benchmark;
pub mod infer;
pub mod report;
pub mod svg;
pub mod synth;
pub mod tune;

use std::io::Write;

use anyhow::Result;

pub use args::{Cli, Command};
pub use benchmark::cmd_benchmark;
pub use infer::{cmd_infer, InferReport};
pub use report::cmd_report;
pub use synth::cmd_synth;
pub use tune::{cmd_tune, TuneSummary};

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Infer(a) => cmd_infer(a, out).map(drop),
        Command::Tune(a) => cmd_tune(a, out).map(drop),
        Command::Benchmark(a) => cmd_benchmark(a, out).map(drop),
        Command::Report(a) => cmd_report(a, out).map(drop),
        Command::Synth(a) => cmd_synth(a, out).map(drop),
    }
}
