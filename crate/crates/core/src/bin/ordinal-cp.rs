fn main() {
    std::process::exit(ordinal_cp::cli::main_with_args(std::env::args_os()));
}
