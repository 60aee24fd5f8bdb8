fn main() {
    std::process::exit(bdr_core::cli::run(std::env::args_os()));
}
