fn main() {
    std::process::exit(rabi::cli::run(std::env::args_os()));
}
