fn main() {
    std::process::exit(secrecy_regions::cli::run(std::env::args_os()));
}
