fn main() {
    std::process::exit(jumpem_cli::main_with_args(std::env::args_os()));
}
