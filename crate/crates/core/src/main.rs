fn main() {
    std::process::exit(voxdx::cli::main_with_args(std::env::args_os()));
}
