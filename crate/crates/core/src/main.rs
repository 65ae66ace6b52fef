use clap::Parser;

use surveymix::cli::{exit_code, render_text, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            if cli.json {
                println!("{summary}");
            } else {
                println!("{}", render_text(&summary));
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({ "error": e.to_string() }));
            }
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
