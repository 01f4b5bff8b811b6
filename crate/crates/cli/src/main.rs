fn main() {
    std::process::exit(rispla_cli::main_with_args(std::env::args_os()));
}
