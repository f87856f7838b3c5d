fn main() {
    std::process::exit(salem_cantor::cli::main_with_args(std::env::args_os()));
}
