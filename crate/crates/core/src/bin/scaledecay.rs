fn main() {
    std::process::exit(scaledecay::cli::run_from_args(std::env::args_os()));
}
