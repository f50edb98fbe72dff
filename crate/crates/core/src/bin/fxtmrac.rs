fn main() {
    std::process::exit(fxtmrac::cli::run(std::env::args_os()));
}
