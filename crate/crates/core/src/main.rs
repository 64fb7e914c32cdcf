fn main() {
    std::process::exit(glai::cli::main());
}
