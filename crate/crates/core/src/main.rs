fn main() {
    std::process::exit(fotd_lambert::cli::run(std::env::args_os()));
}
