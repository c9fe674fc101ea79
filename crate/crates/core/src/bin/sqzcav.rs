fn main() {
    std::process::exit(sqzcav::cli::run(std::env::args_os()));
}
