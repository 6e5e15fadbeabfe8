fn main() {
    std::process::exit(sconvex::cli::main());
}
