fn main() {
    std::process::exit(anisoflow::cli::run(std::env::args_os()));
}
