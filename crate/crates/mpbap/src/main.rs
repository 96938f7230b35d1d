use clap::Parser;

fn main() {
    let cli = mpbap::cli::Cli::parse();
    std::process::exit(mpbap::cli::run(cli));
}
