use clap::Parser;

fn main() {
    let cli = zfenergy_cli::Cli::parse();
    if let Err(err) = zfenergy_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(zfenergy_cli::exit_code(&err));
    }
}
