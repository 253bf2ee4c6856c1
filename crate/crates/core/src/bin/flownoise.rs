fn main() {
    std::process::exit(flownoise::cli::run(std::env::args_os()));
}
