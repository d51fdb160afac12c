fn main() {
    std::process::exit(concentra::cli::main_entry());
}
