fn main() {
    std::process::exit(contopic::cli::run(std::env::args_os()));
}
