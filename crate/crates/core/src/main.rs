use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use gh_conjugacy::cli::{run, Command, Overrides};

#[derive(Parser)]
#[command(
    name = "gh-conjugacy",
    version,
    about = "Certified conjugacies for generalized hyperbolic operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that the operator is generalized hyperbolic
    GhCheck(Flags),
    /// Certify the decay constants (c, t, d) and the admissible epsilon
    Constants(Flags),
    /// Build both conjugacies and verify them on random samples
    Conjugate(Flags),
    /// Linearize a map near a fixed point
    Linearize(Flags),
    /// Compare empirical Hölder quotients with the certified constant
    HolderProbe(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::GhCheck(f) => (Command::GhCheck, f),
        Cmd::Constants(f) => (Command::Constants, f),
        Cmd::Conjugate(f) => (Command::Conjugate, f),
        Cmd::Linearize(f) => (Command::Linearize, f),
        Cmd::HolderProbe(f) => (Command::HolderProbe, f),
    };
    let overrides = Overrides {
        out: flags.out,
        samples: flags.samples,
        seed: flags.seed,
    };
    std::process::exit(run(command, &flags.config, &overrides));
}
