fn main() {
    std::process::exit(handfix::cli::run(std::env::args_os()));
}
