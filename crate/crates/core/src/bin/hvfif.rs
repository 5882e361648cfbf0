fn main() {
    std::process::exit(hvfif::cli::main_with_args(std::env::args_os()));
}
