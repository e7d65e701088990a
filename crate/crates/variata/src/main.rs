use clap::Parser;

fn main() {
    let cli = variata::cli::Cli::parse();
    if let Err(err) = variata::cli::run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
