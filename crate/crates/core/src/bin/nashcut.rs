fn main() {
    std::process::exit(nashcut::cli::run(std::env::args()));
}
