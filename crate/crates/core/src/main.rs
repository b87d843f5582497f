fn main() {
    std::process::exit(pulse_reduction::cli::main_with_args(std::env::args_os()));
}
