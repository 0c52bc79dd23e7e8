fn main() {
    std::process::exit(filternas::harness::cli::run(std::env::args()));
}
