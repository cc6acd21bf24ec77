fn main() {
    std::process::exit(smilewa::cli::main_entry());
}
