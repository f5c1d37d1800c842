fn main() {
    std::process::exit(dephase::cli::main_with_args(std::env::args_os()));
}
