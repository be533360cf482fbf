fn main() {
    std::process::exit(hybridqed::cli::main_with_args(std::env::args_os()));
}
