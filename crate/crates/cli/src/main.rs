fn main() {
    std::process::exit(ncb_cli::run(std::env::args_os()));
}
