fn main() {
    std::process::exit(corank::cli::run(std::env::args_os()));
}
