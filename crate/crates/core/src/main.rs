fn main() {
    std::process::exit(tsdiff::cli::run(std::env::args_os()));
}
