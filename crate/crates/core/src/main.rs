fn main() {
    std::process::exit(fogpon::harness::cli::run(std::env::args_os()));
}
