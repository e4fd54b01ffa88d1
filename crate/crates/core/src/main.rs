fn main() {
    std::process::exit(fota::cli::main_with_args(std::env::args_os()));
}
