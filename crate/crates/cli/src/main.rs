fn main() {
    std::process::exit(topicrag_cli::cli::run(std::env::args_os()));
}
