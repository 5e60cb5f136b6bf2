fn main() {
    std::process::exit(stopwise::cli::run(std::env::args_os()));
}
