fn main() {
    std::process::exit(tvface_cli::run(std::env::args_os()));
}
