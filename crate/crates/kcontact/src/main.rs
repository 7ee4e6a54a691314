fn main() {
    std::process::exit(kcontact::cli::main_entry());
}
