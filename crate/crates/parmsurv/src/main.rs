use clap::Parser;

fn main() {
    let cli = parmsurv::cli::Cli::parse();
    match parmsurv::cli::run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
