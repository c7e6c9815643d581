fn main() {
    std::process::exit(hcma_core::cli::run_cli(std::env::args_os()));
}
