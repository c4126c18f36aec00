fn main() {
    std::process::exit(gocnn::cli::run(std::env::args_os()));
}
