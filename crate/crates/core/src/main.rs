fn main() {
    std::process::exit(harpia::cli::main_with(std::env::args_os()));
}
