use clap::Parser;
use ppgvc_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(f) = run(cli) {
        eprintln!("error: {f}");
        std::process::exit(f.code);
    }
}
