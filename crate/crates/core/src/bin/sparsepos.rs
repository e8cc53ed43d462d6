use clap::Parser;

use sparsepos::cli::{run, Args};

fn main() {
    let args = Args::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(args, &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
