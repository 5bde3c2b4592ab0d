fn main() {
    std::process::exit(safe_coverage_cli::run_cli(std::env::args_os()));
}
