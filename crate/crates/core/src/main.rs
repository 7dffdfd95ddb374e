fn main() {
    std::process::exit(cogemo::cli::run(std::env::args_os()));
}
