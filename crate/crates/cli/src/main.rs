use std::process::exit;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Err(err) = speccert_cli::run_cli(&args) {
        eprintln!("error: {err}");
        exit(err.exit_code());
    }
}
