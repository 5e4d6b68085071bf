use clap::Parser;

use gossip_core::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
