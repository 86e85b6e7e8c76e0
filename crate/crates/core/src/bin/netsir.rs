fn main() {
    std::process::exit(netsir::cli::main_with_args(std::env::args_os()));
}
