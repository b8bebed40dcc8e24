fn main() {
    std::process::exit(narrow_dbm::cli::run(std::env::args_os()));
}
