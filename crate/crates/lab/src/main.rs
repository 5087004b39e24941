fn main() {
    std::process::exit(olnl::cli::run(std::env::args_os()));
}
