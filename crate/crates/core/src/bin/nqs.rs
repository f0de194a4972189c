fn main() {
    std::process::exit(nqs_core::cli::main());
}
