fn main() {
    std::process::exit(rabi_exact::cli::run(std::env::args_os()));
}
