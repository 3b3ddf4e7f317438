fn main() {
    std::process::exit(diffoci_cli::run(std::env::args_os()));
}
