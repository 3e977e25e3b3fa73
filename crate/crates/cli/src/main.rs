fn main() {
    std::process::exit(distboost_cli::run(std::env::args_os()));
}
