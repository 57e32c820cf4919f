fn main() {
    std::process::exit(dsson_cli::main_entry());
}
