use clap::Parser;

fn main() {
    let cli = epnet::cli::Cli::parse();
    let mut out = std::io::stdout().lock();
    if let Err(e) = epnet::cli::run(cli, &mut out) {
        eprintln!("epnet: {e}");
        std::process::exit(epnet::cli::exit_code(&e));
    }
}
