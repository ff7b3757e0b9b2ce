fn main() {
    std::process::exit(delayed_binomial::cli::run(std::env::args()));
}
