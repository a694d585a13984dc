fn main() {
    std::process::exit(stochfrac::cli::run(std::env::args_os()));
}
