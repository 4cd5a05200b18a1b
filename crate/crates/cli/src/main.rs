use clap::Parser;
use dgnet_cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        let mut line = err.to_string();
        for cause in err.chain().skip(1) {
            let c = cause.to_string();
            if !line.contains(&c) {
                line = format!("{line}: {c}");
            }
        }
        eprintln!("error: {line}");
        std::process::exit(exit_code(&err));
    }
}
