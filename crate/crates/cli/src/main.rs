use clap::Parser;

fn main() {
    let cli = tactslip_cli::args::Cli::parse();
    if let Err(e) = tactslip_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
