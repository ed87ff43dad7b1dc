fn main() {
    std::process::exit(murre::cli::main_with_args(std::env::args_os()));
}
