fn main() {
    std::process::exit(fractal_drift::cli::run_from_args(std::env::args_os()));
}
