use clap::Parser;

fn main() {
    let cli = annulus_cli::Cli::parse();
    std::process::exit(annulus_cli::run(cli));
}
