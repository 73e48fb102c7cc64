fn main() {
    std::process::exit(varsmooth::cli::main_with_args(std::env::args().collect()));
}
