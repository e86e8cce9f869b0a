fn main() {
    std::process::exit(reverie_service::cli::main());
}
