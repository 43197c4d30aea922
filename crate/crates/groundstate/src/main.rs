use clap::Parser;
use groundstate::cli;

fn main() {
    let args = cli::CliArgs::parse();
    std::process::exit(cli::execute(args));
}
