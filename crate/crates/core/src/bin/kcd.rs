fn main() {
    std::process::exit(coreshrink::cli::run(std::env::args_os()));
}
