fn main() {
    std::process::exit(cogmap::cli::main_with_args(std::env::args_os()));
}
