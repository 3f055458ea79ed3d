fn main() {
    std::process::exit(skyq::cli::run());
}
