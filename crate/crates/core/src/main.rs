fn main() {
    std::process::exit(roundwalk::cli::main_with_args(std::env::args_os()));
}
