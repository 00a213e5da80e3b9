fn main() {
    std::process::exit(oulab::cli::run(std::env::args_os()));
}
