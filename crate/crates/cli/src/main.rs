use clap::Parser;

use pairswap_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Err(e) = run(&cli, &argv) {
        eprintln!("pairswap: {e}");
        std::process::exit(e.exit_code());
    }
}
