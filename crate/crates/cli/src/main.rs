use clap::Parser;
use infoprice_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    match infoprice_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
