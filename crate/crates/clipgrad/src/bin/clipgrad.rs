fn main() {
    std::process::exit(clipgrad::cli::run_cli(std::env::args_os()));
}
