fn main() {
    std::process::exit(contraction::cli::main_entry());
}
