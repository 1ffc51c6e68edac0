fn main() {
    std::process::exit(cxseis::cli::run());
}
