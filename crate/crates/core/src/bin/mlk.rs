fn main() {
    std::process::exit(mlkakeya::cli::main_with_args(std::env::args_os()));
}
