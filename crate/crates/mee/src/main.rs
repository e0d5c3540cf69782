fn main() {
    std::process::exit(mee::cli::run(std::env::args_os()));
}
