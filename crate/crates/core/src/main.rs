fn main() {
    std::process::exit(fve::cli::main());
}
