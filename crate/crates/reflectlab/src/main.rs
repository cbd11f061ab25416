fn main() {
    std::process::exit(reflectlab::cli::run(std::env::args_os()));
}
