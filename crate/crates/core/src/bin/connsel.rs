fn main() {
    std::process::exit(connsel::cli::run());
}
