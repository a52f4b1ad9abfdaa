fn main() {
    std::process::exit(kinsplit::harness::cli::run_cli(std::env::args_os()));
}
