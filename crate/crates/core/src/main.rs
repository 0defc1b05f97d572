fn main() {
    std::process::exit(reflected_nw::cli::main_with_args(std::env::args_os()));
}
