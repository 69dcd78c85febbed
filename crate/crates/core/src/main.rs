fn main() {
    std::process::exit(symprod::cli::run(std::env::args_os()));
}
