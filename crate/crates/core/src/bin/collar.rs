fn main() {
    std::process::exit(collar::cli::run(std::env::args_os()));
}
