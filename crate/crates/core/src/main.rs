fn main() {
    std::process::exit(cdfagg::cli::main_with_args(std::env::args_os()));
}
