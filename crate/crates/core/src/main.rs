fn main() {
    std::process::exit(gcreg::cli::run_cli(std::env::args_os()));
}
