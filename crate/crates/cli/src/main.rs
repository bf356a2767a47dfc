use clap::Parser;
use mmloc_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("mmloc: {e}");
        std::process::exit(e.exit_code());
    }
}
