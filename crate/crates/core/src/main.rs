fn main() {
    std::process::exit(dppmask::cli::run(std::env::args_os()));
}
