fn main() {
    std::process::exit(intermob_cli::run(std::env::args_os()));
}
