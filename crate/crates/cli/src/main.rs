use clap::Parser;
use dpclustx_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
