fn main() {
    std::process::exit(qnet::cli::main_with_args(std::env::args_os()));
}
