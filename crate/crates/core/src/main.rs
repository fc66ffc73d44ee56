fn main() {
    std::process::exit(foldmap::cli::run(std::env::args_os()));
}
