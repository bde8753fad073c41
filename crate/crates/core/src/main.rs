fn main() {
    std::process::exit(siren_core::cli::run(std::env::args_os()));
}
