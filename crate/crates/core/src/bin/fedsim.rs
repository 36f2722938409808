fn main() {
    std::process::exit(fedsim::cli::main());
}
