fn main() {
    std::process::exit(barkit::cli::main_with_args(std::env::args_os()));
}
