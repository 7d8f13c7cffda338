use clap::Parser;
use sepqcqp_cli::Cli;

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    std::process::exit(sepqcqp_cli::run(&cli));
}
