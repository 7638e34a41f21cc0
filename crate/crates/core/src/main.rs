fn main() {
    std::process::exit(ifsgraph::cli::main_with(std::env::args()));
}
