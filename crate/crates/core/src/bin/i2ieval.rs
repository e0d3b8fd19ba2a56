fn main() {
    std::process::exit(i2ieval::cli::run(std::env::args_os()));
}
