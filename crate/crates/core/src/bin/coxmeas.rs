use clap::Parser;

fn main() {
    std::process::exit(coxmeas::cli::run(coxmeas::cli::Cli::parse()));
}
