fn main() {
    std::process::exit(logdirichlet::cli::main_with_args(std::env::args_os()));
}
