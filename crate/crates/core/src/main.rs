fn main() {
    std::process::exit(bellpv::cli::main());
}
