fn main() {
    std::process::exit(datafabric::cli::run());
}
