fn main() {
    std::process::exit(walrus_cli::run(std::env::args_os()));
}
