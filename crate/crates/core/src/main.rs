fn main() {
    std::process::exit(vortex_pair::cli::main_with_args(std::env::args_os()));
}
