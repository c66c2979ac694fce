use clap::Parser;

use mvrbm_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("mvrbm: {e}");
        std::process::exit(e.exit_code());
    }
}
