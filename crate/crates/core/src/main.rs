fn main() {
    std::process::exit(tailop::cli::main_with_args(std::env::args_os()));
}
