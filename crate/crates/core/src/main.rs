fn main() {
    std::process::exit(udparse::cli::run(std::env::args_os()));
}
