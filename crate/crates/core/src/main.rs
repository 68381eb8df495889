fn main() {
    std::process::exit(gencvx::cli::run(std::env::args_os()));
}
