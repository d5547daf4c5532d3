fn main() {
    std::process::exit(opcalc::cli::run(std::env::args_os()));
}
