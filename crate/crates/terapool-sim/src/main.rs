use clap::Parser;

fn main() {
    let cli = terapool_sim::cli::Cli::parse();
    if let Err(e) = terapool_sim::cli::main_with_args(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
