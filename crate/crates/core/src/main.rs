fn main() {
    std::process::exit(cachepilot::harness::cli::main());
}
