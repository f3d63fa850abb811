use clap::Parser;

use morita_lab::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
