fn main() {
    std::process::exit(boolinf_cli::run(std::env::args_os()));
}
