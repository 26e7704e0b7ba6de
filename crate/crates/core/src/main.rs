fn main() {
    std::process::exit(mpstream::cli::main_with_args(std::env::args_os()));
}
