fn main() {
    std::process::exit(lswspec::cli::main());
}
