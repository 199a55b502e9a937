fn main() {
    std::process::exit(dsa::cli::run());
}
