fn main() {
    std::process::exit(coopsight_cli::run());
}
