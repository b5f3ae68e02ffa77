fn main() {
    std::process::exit(optval::cli::run(std::env::args_os()));
}
