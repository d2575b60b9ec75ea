use clap::Parser;

fn main() {
    let cli = qaloha_cli::cli::Cli::parse();
    match qaloha_cli::run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
