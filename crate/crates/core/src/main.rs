fn main() {
    std::process::exit(tricept::cli::run(std::env::args_os()));
}
